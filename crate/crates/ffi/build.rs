#[cfg(feature = "header")]
fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").unwrap();
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
    let config = cbindgen::Config::from_file(format!("{crate_dir}/cbindgen.toml"))
        .expect("cbindgen.toml is readable");
    cbindgen::generate_with_config(&crate_dir, config)
        .expect("header generation")
        .write_to_file(format!("{crate_dir}/include/guideqa.h"));
}

#[cfg(not(feature = "header"))]
fn main() {}
