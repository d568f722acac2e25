fn main() {
    std::process::exit(jdlg::cli::run(std::env::args_os()));
}
