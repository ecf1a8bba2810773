fn main() {
    std::process::exit(balance_forge::cli::run(std::env::args_os()));
}
