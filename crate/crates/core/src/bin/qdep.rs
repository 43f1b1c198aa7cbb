fn main() {
    std::process::exit(qdep::cli::main_with_args(std::env::args_os()));
}
