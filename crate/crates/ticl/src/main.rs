fn main() {
    ticl::cli::main();
}
