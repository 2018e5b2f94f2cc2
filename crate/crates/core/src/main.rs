fn main() {
    std::process::exit(ltvprop::cli::run(std::env::args_os()));
}
