fn main() {
    std::process::exit(linksched_cli::dispatch(std::env::args_os()));
}
