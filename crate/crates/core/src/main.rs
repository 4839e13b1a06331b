fn main() {
    std::process::exit(fastgabor::cli::main_with_args(std::env::args_os()));
}
