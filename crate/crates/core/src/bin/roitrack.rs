fn main() {
    std::process::exit(roitrack::cli::cli_main(std::env::args_os()));
}
