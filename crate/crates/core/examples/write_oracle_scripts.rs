//! Regenerates `suites/scripts/*` from the fixtures.

#[path = "../tests/common/oracle.rs"]
mod oracle;

fn main() -> std::io::Result<()> {
    for (variant, id, json) in oracle::all_scripts() {
        let path = oracle::script_path(variant, &id);
        std::fs::create_dir_all(path.parent().unwrap())?;
        std::fs::write(&path, json)?;
        println!("{}", path.display());
    }
    Ok(())
}
