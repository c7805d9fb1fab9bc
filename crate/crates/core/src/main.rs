fn main() {
    if let Some(n) = std::env::var("ISLM_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    std::process::exit(islm_core::cli::run(std::env::args_os()));
}
