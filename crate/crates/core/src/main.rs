fn main() {
    std::process::exit(fairlab::report::cli_main(std::env::args_os()));
}
