fn main() {
    std::process::exit(debatetree::cli::main());
}
