fn main() {
    std::process::exit(thermoscope::cli::run(std::env::args_os()));
}
