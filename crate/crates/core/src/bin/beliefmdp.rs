fn main() {
    std::process::exit(beliefmdp::cli::main_with_args(std::env::args_os()));
}
