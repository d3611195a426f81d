fn main() {
    std::process::exit(pillarsim_cli::run());
}
