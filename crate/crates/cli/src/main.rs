fn main() {
    std::process::exit(sl2lab_cli::app::run(std::env::args_os()));
}
