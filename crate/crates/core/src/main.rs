fn main() {
    std::process::exit(wg_eigen::cli::main_with_args(std::env::args_os()));
}
