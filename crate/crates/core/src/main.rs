fn main() {
    std::process::exit(bellshape::cli::main_with_args(std::env::args_os()));
}
