fn main() {
    std::process::exit(subround_cli::dispatch(std::env::args_os()));
}
