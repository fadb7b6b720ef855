use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use super::{Labels, Mdp};

/// The mission query in PRISM property syntax.
///
/// PRISM reads a bound `P>0` on an MDP as "under every scheduler", so the
/// existential nested operator is written as `!(P<=0 [...])`.
pub const MISSION_PROPERTY: &str =
    "Pmax=? [ \"alive\" U (\"alive\" & \"rp\" & !(P<=0 [ \"alive\" U (\"alive\" & \"rd\") ])) ]";

/// Contents of the explicit-format files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrismText {
    pub sta: String,
    pub tra: String,
    pub lab: String,
    pub props: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrismFiles {
    pub sta: PathBuf,
    pub tra: PathBuf,
    pub lab: PathBuf,
    pub props: PathBuf,
}

/// Renders `mdp` in PRISM explicit format. Each file starts with its
/// header line; states, choices and transitions follow in index order.
pub fn render_prism(mdp: &Mdp) -> PrismText {
    let mut sta = String::new();
    match mdp.state_space() {
        Some(space) => {
            let width = space.adjacency.iter().map(Vec::len).max().unwrap_or(0);
            let mut header = ["facet", "region", "adv", "obs", "alive"].join(",");
            for i in 0..width {
                let _ = write!(header, ",b{i}");
            }
            let _ = writeln!(sta, "({header})");
            for (i, s) in space.states.iter().enumerate() {
                let _ = write!(sta, "{i}:({},{},{},{},{}", s.facet, s.region, s.adversaries, s.obstacle, u8::from(s.alive));
                for k in 0..width {
                    match s.beliefs.get(k) {
                        Some(b) => {
                            let _ = write!(sta, ",{b}");
                        }
                        None => sta.push_str(",-1"),
                    }
                }
                sta.push_str(")\n");
            }
        }
        None => {
            sta.push_str("(s)\n");
            for i in 0..mdp.num_states() {
                let _ = writeln!(sta, "{i}:({i})");
            }
        }
    }

    let mut tra = String::new();
    let _ = writeln!(tra, "{} {} {}", mdp.num_states(), mdp.num_choices(), mdp.num_transitions());
    for s in 0..mdp.num_states() {
        for (k, c) in mdp.choices(s).iter().enumerate() {
            let action: String = mdp
                .action_name(c.action)
                .chars()
                .map(|ch| if ch.is_ascii_alphanumeric() { ch } else { '_' })
                .collect();
            for t in mdp.transitions(c) {
                let _ = writeln!(tra, "{s} {k} {} {} {action}", t.target, t.prob);
            }
        }
    }

    let mut lab = String::from("0=\"init\" 1=\"alive\" 2=\"rp\" 3=\"rd\"\n");
    for s in 0..mdp.num_states() {
        let l = mdp.labels(s);
        let mut ids = Vec::new();
        if s == mdp.init() {
            ids.push("0");
        }
        for (flag, id) in [(Labels::ALIVE, "1"), (Labels::PICKUP, "2"), (Labels::DROPOFF, "3")] {
            if l.contains(flag) {
                ids.push(id);
            }
        }
        if !ids.is_empty() {
            let _ = writeln!(lab, "{s}: {}", ids.join(" "));
        }
    }

    PrismText { sta, tra, lab, props: format!("{MISSION_PROPERTY}\n") }
}

/// Writes `<base>.sta`, `<base>.tra`, `<base>.lab` and `<base>.props`.
pub fn export_prism(mdp: &Mdp, base: &Path) -> io::Result<PrismFiles> {
    let text = render_prism(mdp);
    let with_ext = |ext: &str| {
        let mut name = base.as_os_str().to_owned();
        name.push(".");
        name.push(ext);
        PathBuf::from(name)
    };
    let files = PrismFiles { sta: with_ext("sta"), tra: with_ext("tra"), lab: with_ext("lab"), props: with_ext("props") };
    std::fs::write(&files.sta, text.sta)?;
    std::fs::write(&files.tra, text.tra)?;
    std::fs::write(&files.lab, text.lab)?;
    std::fs::write(&files.props, text.props)?;
    Ok(files)
}
