fn main() {
    std::process::exit(be_workbench::cli::run(std::env::args_os()));
}
