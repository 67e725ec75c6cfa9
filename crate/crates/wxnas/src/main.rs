fn main() {
    std::process::exit(wxnas::cli::run(std::env::args_os()));
}
