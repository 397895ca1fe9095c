fn main() {
    std::process::exit(eprlab::cli::main_with_args(std::env::args_os()));
}
