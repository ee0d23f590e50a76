fn main() {
    std::process::exit(nnflow_cli::execute(std::env::args_os()));
}
