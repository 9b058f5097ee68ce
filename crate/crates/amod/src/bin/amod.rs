fn main() {
    std::process::exit(amod::cli::cli_dispatch(std::env::args()));
}
