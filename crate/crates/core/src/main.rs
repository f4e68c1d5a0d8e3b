fn main() {
    std::process::exit(ttde::cli::main_with_args(std::env::args_os()));
}
