fn main() {
    std::process::exit(conjunct::cli::main_with_env());
}
