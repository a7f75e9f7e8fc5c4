use std::path::PathBuf;

use hiseg::cli;
use hiseg::config::CONFIG_DIR_VAR;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let config_dir = std::env::var_os(CONFIG_DIR_VAR).map(PathBuf::from);
    match cli::run(args, config_dir.as_deref()) {
        Ok(out) => print!("{out}"),
        Err(e) => {
            eprintln!("{}", e.record());
            std::process::exit(e.exit_code());
        }
    }
}
