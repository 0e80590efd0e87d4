fn main() {
    std::process::exit(ccg_cli::dispatch(std::env::args_os()));
}
