fn main() {
    std::process::exit(nltr::cli::main_with_args(std::env::args_os()));
}
