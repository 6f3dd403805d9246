fn main() {
    std::process::exit(pigano::cli::main_with_args(std::env::args_os()));
}
