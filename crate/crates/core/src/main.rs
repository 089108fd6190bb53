fn main() {
    std::process::exit(ptp_core::cli::main_with_args(std::env::args_os()));
}
