fn main() {
    std::process::exit(mixlab::cli::main_with(std::env::args_os()));
}
