fn main() {
    std::process::exit(cowlib::cli::run(std::env::args_os()));
}
