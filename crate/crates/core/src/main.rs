fn main() {
    std::process::exit(commbench::cli::main_with_args(std::env::args_os()));
}
