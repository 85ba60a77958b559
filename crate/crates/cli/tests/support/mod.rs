//! Helpers for driving the `irclone` binary from tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use irclone::ir::AstNode;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

pub fn irclone(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irclone")).args(args).current_dir(cwd).output().expect("binary runs")
}

pub fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

/// Builds a corpus from the paired fixtures: every PD gets four copies of
/// its C program and three of its COBOL program, and a description. One
/// extra PD has no description.
pub fn mini_corpus(root: &Path) -> Vec<String> {
    let mut stems: Vec<String> = std::fs::read_dir(fixtures().join("paired"))
        .unwrap()
        .map(|e| e.unwrap().path().file_stem().unwrap().to_string_lossy().into_owned())
        .collect();
    stems.sort();
    stems.dedup();
    for pd in &stems {
        let c = read(fixtures().join("paired").join(format!("{pd}.c")));
        let cob = read(fixtures().join("paired").join(format!("{pd}.cob")));
        for i in 0..4 {
            write(&root.join(format!("data/{pd}/C/{pd}_c{i}.c")), &c);
        }
        for i in 0..3 {
            write(&root.join(format!("data/{pd}/COBOL/{pd}_k{i}.cob")), &cob);
        }
        write(&root.join(format!("problem_descriptions/{pd}.html")), &format!("<p>{pd}</p>"));
    }
    let c = read(fixtures().join("threshold.c"));
    for i in 0..3 {
        write(&root.join(format!("data/zz_nodesc/C/nd{i}.c")), &c);
    }
    stems
}

pub fn write(path: &Path, text: &str) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, text).unwrap();
}

/// Four small test splits; the COBOL ones take four PDs each.
pub const SMALL_SPEC: &str = "\
seed = 7
train_val_ratio = 0.75
test = cobol-3,COBOL,3,none,4
test = cobol-2,COBOL,2,512,4
test = c-4,C,4
test = c-2,C,2,512
";

/// Tree shape with leaf values blanked.
pub fn skeleton(node: &AstNode) -> String {
    let mut out = format!("({:?}", node.kind);
    for e in &node.children {
        out.push_str(&format!(" {:?}:{}", e.role, skeleton(&e.node)));
    }
    out.push(')');
    out
}

/// Copies the paired fixtures into `dir` under language-prefixed names, so
/// the C and COBOL versions of a program get distinct source ids.
pub fn paired_copy(dir: &Path) -> PathBuf {
    let out = dir.join("paired");
    for e in std::fs::read_dir(fixtures().join("paired")).unwrap() {
        let p = e.unwrap().path();
        let ext = p.extension().unwrap().to_string_lossy().into_owned();
        let stem = p.file_stem().unwrap().to_string_lossy().into_owned();
        write(&out.join(format!("{ext}_{stem}.{ext}")), &read(&p));
    }
    out
}
