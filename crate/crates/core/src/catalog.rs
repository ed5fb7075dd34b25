//! Small reference networks used across tests, examples and the CLI.

use crate::crn::{Crn, CrnBuilder};
use crate::decide::{Crc, Crd};

/// `3A -> 2B`, `B + C -> A`, `C -> B`, `B -> C`.
pub fn four_reaction_crn() -> Crn {
    "3A -> 2B\nB + C -> A\nC -> B\nB -> C".parse().expect("valid")
}

/// Decides #X ≡ #Y (mod 3); V votes yes, X and Y vote no.
pub fn mod3_crd() -> Crd {
    let crn: Crn = "3X -> V\n3Y -> V\nX + Y -> V\nX + V -> X\nY + V -> Y"
        .parse()
        .expect("valid");
    Crd::new(crn, &["X", "Y"], &["X", "Y"], &["V"]).expect("valid roles")
}

/// min(x, y) through `X + Y -> Z`.
pub fn min_crc() -> Crc {
    let crn: Crn = "X + Y -> Z".parse().expect("valid");
    Crc::new(crn, &["X", "Y"], &["Z"]).expect("valid roles")
}

/// max(x, y) = x + y - min(x, y).
pub fn max_crc() -> Crc {
    let crn: Crn = "X -> X' + Z\nY -> Y' + Z\nX' + Y' + Z -> 0".parse().expect("valid");
    Crc::new(crn, &["X", "Y"], &["Z"]).expect("valid roles")
}

/// Existence check over bit-vector species `Xb1b2b3`: yes iff some A1 or A2
/// molecule is present and no A3 molecule. Inputs are `X100` (A1), `X010`
/// (A2), `X001` (A3) and the fuel `X000`.
pub fn existence_crd() -> Crd {
    let name = |v: u8| format!("X{}{}{}", (v >> 2) & 1, (v >> 1) & 1, v & 1);
    let mut b = CrnBuilder::new();
    for v in 0u8..8 {
        for w in (v + 1)..8 {
            let (nv, nw, no) = (name(v), name(w), name(v | w));
            b.reaction(&[(nv.as_str(), 1), (nw.as_str(), 1)], &[(no.as_str(), 2)], 1.0);
        }
    }
    let crn = b.build().expect("valid");
    let yes: Vec<String> = (0u8..8)
        .filter(|v| (v & 0b100 != 0 || v & 0b010 != 0) && v & 0b001 == 0)
        .map(name)
        .collect();
    let no: Vec<String> = (0u8..8).map(name).filter(|n| !yes.contains(n)).collect();
    let input: Vec<String> = vec!["X100".into(), "X010".into(), "X001".into(), "X000".into()];
    Crd::new(crn, &input, &no, &yes).expect("valid roles")
}

/// `L + L -> L`.
pub fn leader_election() -> Crn {
    "2L -> L".parse().expect("valid")
}

/// Counter automaton moving twice the input from `x` to `y`.
pub const DOUBLING_CA: &str = "\
#start q0
#halt halt
#input x
state q0: dec x -> q1 else halt
state q1: inc y -> q2
state q2: inc y -> q0
";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn existence_crd_shape() {
        let d = existence_crd();
        assert_eq!(d.crn().num_species(), 8);
        assert_eq!(d.crn().reactions().len(), 28);
        assert!(d.is_voter_total());
        assert!(d.crn().reactions().iter().all(|r| r.is_bimolecular()));
    }
}
