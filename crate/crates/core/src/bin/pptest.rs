fn main() {
    std::process::exit(projection_pursuit::cli::main());
}
