fn main() {
    std::process::exit(gst::cli::run(std::env::args_os()));
}
