fn main() {
    std::process::exit(renewal_lab::cli::main_with_args(std::env::args_os()));
}
