fn main() {
    std::process::exit(switchctl::cli::run(std::env::args_os()));
}
