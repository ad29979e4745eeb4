fn main() {
    std::process::exit(uav_mclp::cli::run(std::env::args_os()));
}
