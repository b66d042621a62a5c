fn main() {
    std::process::exit(sigspike::cli::main_with(std::env::args_os()));
}
