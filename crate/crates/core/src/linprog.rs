//! Exact two-phase simplex over rationals for problems `A x = b, x ≥ 0`.

use num::{BigRational, One, Signed, Zero};

pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    /// An optimal vertex (or any feasible point when there is no objective).
    Optimal(Vec<Rational>),
    /// Feasible but the objective is unbounded; carries a feasible point.
    Unbounded(Vec<Rational>),
    Infeasible,
}

impl LpOutcome {
    pub fn point(&self) -> Option<&[Rational]> {
        match self {
            LpOutcome::Optimal(x) | LpOutcome::Unbounded(x) => Some(x),
            LpOutcome::Infeasible => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    n: usize,
    objective: Option<Vec<Rational>>,
}

impl LinearProgram {
    /// Equality constraints `rows · x = rhs` over `n` nonnegative variables.
    pub fn new(rows: Vec<Vec<Rational>>, rhs: Vec<Rational>, n: usize) -> Self {
        assert_eq!(rows.len(), rhs.len());
        assert!(rows.iter().all(|r| r.len() == n));
        LinearProgram {
            rows,
            rhs,
            n,
            objective: None,
        }
    }

    pub fn maximize(mut self, cost: Vec<Rational>) -> Self {
        assert_eq!(cost.len(), self.n);
        self.objective = Some(cost);
        self
    }

    pub fn solve(&self) -> LpOutcome {
        let m = self.rows.len();
        let n = self.n;
        let width = n + m + 1;
        let mut t = Tableau {
            cells: Vec::with_capacity(m),
            basis: (n..n + m).collect(),
            width,
        };
        for (i, row) in self.rows.iter().enumerate() {
            let neg = self.rhs[i].is_negative();
            let mut cells: Vec<Rational> = row
                .iter()
                .map(|q| if neg { -q.clone() } else { q.clone() })
                .collect();
            cells.extend((0..m).map(|k| if k == i { Rational::one() } else { Rational::zero() }));
            cells.push(if neg { -self.rhs[i].clone() } else { self.rhs[i].clone() });
            t.cells.push(cells);
        }

        let mut phase1 = vec![Rational::zero(); n + m];
        for c in phase1.iter_mut().skip(n) {
            *c = -Rational::one();
        }
        t.optimize(&phase1, n + m);
        let artificial_sum: Rational = t
            .basis
            .iter()
            .enumerate()
            .filter(|&(_, &b)| b >= n)
            .map(|(i, _)| t.cells[i][width - 1].clone())
            .sum();
        if artificial_sum.is_positive() {
            return LpOutcome::Infeasible;
        }
        // Drive remaining (zero-level) artificials out, dropping redundant rows.
        let mut i = 0;
        while i < t.cells.len() {
            if t.basis[i] >= n {
                match (0..n).find(|&j| !t.cells[i][j].is_zero()) {
                    Some(j) => t.pivot(i, j),
                    None => {
                        t.cells.remove(i);
                        t.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }

        let bounded = match &self.objective {
            Some(cost) => {
                let mut full = cost.clone();
                full.extend(std::iter::repeat_n(Rational::zero(), m));
                t.optimize(&full, n)
            }
            None => true,
        };
        let x = t.solution(n);
        if bounded {
            LpOutcome::Optimal(x)
        } else {
            LpOutcome::Unbounded(x)
        }
    }
}

struct Tableau {
    cells: Vec<Vec<Rational>>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.cells[r][c].clone();
        for v in self.cells[r].iter_mut() {
            *v /= &p;
        }
        let pivot_row = self.cells[r].clone();
        for (i, row) in self.cells.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v -= &f * pv;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Maximises `cost · x` using columns `< allowed`. Returns false if unbounded.
    fn optimize(&mut self, cost: &[Rational], allowed: usize) -> bool {
        loop {
            let entering = (0..allowed).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let mut z = cost[j].clone();
                for (i, &b) in self.basis.iter().enumerate() {
                    if !cost[b].is_zero() && !self.cells[i][j].is_zero() {
                        z -= &cost[b] * &self.cells[i][j];
                    }
                }
                z.is_positive()
            });
            let Some(j) = entering else { return true };
            let rhs = self.width - 1;
            let mut best: Option<(usize, Rational)> = None;
            for i in 0..self.cells.len() {
                let a = &self.cells[i][j];
                if !a.is_positive() {
                    continue;
                }
                let ratio = &self.cells[i][rhs] / a;
                let better = match &best {
                    None => true,
                    Some((bi, br)) => {
                        ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi])
                    }
                };
                if better {
                    best = Some((i, ratio));
                }
            }
            match best {
                Some((i, _)) => self.pivot(i, j),
                None => return false,
            }
        }
    }

    fn solution(&self, n: usize) -> Vec<Rational> {
        let mut x = vec![Rational::zero(); n];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < n {
                x[b] = self.cells[i][self.width - 1].clone();
            }
        }
        x
    }
}

pub fn rat(n: i64) -> Rational {
    Rational::from_integer(n.into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ints(v: &[i64]) -> Vec<Rational> {
        v.iter().map(|&x| rat(x)).collect()
    }

    #[test]
    fn small_optimum() {
        // max x + y s.t. x + 2y + s1 = 4, 3x + y + s2 = 6
        let lp = LinearProgram::new(
            vec![ints(&[1, 2, 1, 0]), ints(&[3, 1, 0, 1])],
            ints(&[4, 6]),
            4,
        )
        .maximize(ints(&[1, 1, 0, 0]));
        let x = match lp.solve() {
            LpOutcome::Optimal(x) => x,
            o => panic!("{o:?}"),
        };
        assert_eq!(x[0], Rational::new(8.into(), 5.into()));
        assert_eq!(x[1], Rational::new(6.into(), 5.into()));
    }

    #[test]
    fn infeasible_and_unbounded() {
        let lp = LinearProgram::new(vec![ints(&[1, 1])], ints(&[-1]), 2);
        assert_eq!(lp.solve(), LpOutcome::Infeasible);
        let lp = LinearProgram::new(vec![ints(&[1, -1])], ints(&[0]), 2).maximize(ints(&[1, 0]));
        assert!(matches!(lp.solve(), LpOutcome::Unbounded(_)));
    }

    #[test]
    fn redundant_rows() {
        let lp = LinearProgram::new(
            vec![ints(&[1, 1]), ints(&[2, 2]), ints(&[0, 0])],
            ints(&[3, 6, 0]),
            2,
        )
        .maximize(ints(&[1, 0]));
        assert_eq!(lp.solve(), LpOutcome::Optimal(ints(&[3, 0])));
    }

    proptest! {
        #[test]
        fn feasible_systems_are_solved(
            a in prop::collection::vec(prop::collection::vec(-3i64..=3, 4), 1..4),
            x0 in prop::collection::vec(0i64..=4, 4),
            c in prop::collection::vec(-2i64..=2, 4),
        ) {
            let b: Vec<i64> = a.iter().map(|r| r.iter().zip(&x0).map(|(p, q)| p * q).sum()).collect();
            let rows: Vec<Vec<Rational>> = a.iter().map(|r| ints(r)).collect();
            let lp = LinearProgram::new(rows.clone(), ints(&b), 4).maximize(ints(&c));
            let out = lp.solve();
            let x = out.point().expect("feasible by construction").to_vec();
            for (r, bi) in rows.iter().zip(&b) {
                let lhs: Rational = r.iter().zip(&x).map(|(p, q)| p * q).sum();
                prop_assert_eq!(lhs, rat(*bi));
            }
            prop_assert!(x.iter().all(|q| !q.is_negative()));
            if let LpOutcome::Optimal(_) = out {
                let val = |v: &[Rational]| -> Rational { v.iter().zip(&c).map(|(p, q)| p * rat(*q)).sum() };
                prop_assert!(val(&x) >= val(&ints(&x0)));
            }
        }
    }
}
