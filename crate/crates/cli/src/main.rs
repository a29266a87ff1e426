fn main() {
    let code = match qggm_cli::run(std::env::args_os()) {
        Ok(()) => qggm_cli::EXIT_OK,
        Err(err) => {
            if let Some(e) = err.downcast_ref::<clap::Error>() {
                let _ = e.print();
                e.exit_code()
            } else {
                eprintln!("error: {err:#}");
                qggm_cli::exit_code(&err)
            }
        }
    };
    std::process::exit(code);
}
