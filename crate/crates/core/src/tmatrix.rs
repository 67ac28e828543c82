//! Tail-probability matrix `t_{x,c} = P(X >= x | c)` and its numeric rank.

use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::ItemParams;
use crate::qspace::{bools_to_string, partition, Partition, QMatrix};

/// Largest item count for which the `2^J`-row matrix is built.
pub const MAX_TMATRIX_ITEMS: usize = 20;

/// Rows per chunk in the streamed QR.
const CHUNK_BITS: usize = 12;

/// Row-major `2^J x L` matrix; row `x` is lexicographic with item 1 as the
/// most significant bit.
#[derive(Debug, Clone, PartialEq)]
pub struct TMatrix {
    pub entries: Vec<f64>,
    pub n_items: usize,
    pub n_classes: usize,
}

impl TMatrix {
    pub fn n_rows(&self) -> usize {
        1 << self.n_items
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.entries[x * self.n_classes..(x + 1) * self.n_classes]
    }

    pub fn get(&self, x: usize, c: usize) -> f64 {
        self.entries[x * self.n_classes + c]
    }

    /// CSV with a `pattern` column followed by one column per class.
    pub fn write_csv<W: Write>(&self, partition: &Partition, mut out: W) -> Result<()> {
        write!(out, "pattern")?;
        for c in &partition.classes {
            write!(out, ",{}", c.minimal_representative)?;
        }
        writeln!(out)?;
        for x in 0..self.n_rows() {
            write!(out, "{}", row_label(x, self.n_items))?;
            for v in self.row(x) {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn row_label(x: usize, n_items: usize) -> String {
    let bits: Vec<bool> = (0..n_items).map(|j| (x >> (n_items - 1 - j)) & 1 == 1).collect();
    bools_to_string(&bits)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankCheck {
    pub identifiable: bool,
    pub rank: usize,
    pub n_classes: usize,
}

/// `P(X_j = 1 | class)` indexed `[j][c]`.
fn success_table(partition: &Partition, items: &ItemParams) -> Vec<Vec<f64>> {
    (0..items.len())
        .map(|j| {
            partition
                .classes
                .iter()
                .map(|c| items.success_prob(j, c.ideal.get(j)))
                .collect()
        })
        .collect()
}

fn check_inputs(q: &QMatrix, items: &ItemParams) -> Result<()> {
    if q.n_items() > MAX_TMATRIX_ITEMS {
        return Err(Error::TooManyItems(q.n_items()));
    }
    items.validate()?;
    if items.len() != q.n_items() {
        return Err(Error::Dimension(format!(
            "{} item parameters for {} items",
            items.len(),
            q.n_items()
        )));
    }
    Ok(())
}

/// Fills rows `base .. base + 2^bits` where the low `bits` items vary.
fn fill_block(p: &[Vec<f64>], base: usize, bits: usize, out: &mut [f64]) {
    let n_items = p.len();
    let l = p[0].len();
    let first = &mut out[..l];
    first.iter_mut().for_each(|v| *v = 1.0);
    for (pos, row) in p.iter().enumerate() {
        let shift = n_items - 1 - pos;
        if shift >= bits && (base >> shift) & 1 == 1 {
            first.iter_mut().zip(row).for_each(|(v, q)| *v *= q);
        }
    }
    for offset in 1..(1usize << bits) {
        let low = offset.trailing_zeros() as usize;
        let parent = offset & (offset - 1);
        let item = n_items - 1 - low;
        let (head, tail) = out.split_at_mut(offset * l);
        let src = &head[parent * l..(parent + 1) * l];
        tail[..l]
            .iter_mut()
            .zip(src.iter().zip(&p[item]))
            .for_each(|(v, (s, q))| *v = s * q);
    }
}

/// DINA tail-probability matrix over the classes of `q`.
pub fn t_matrix(q: &QMatrix, items: &ItemParams) -> Result<TMatrix> {
    check_inputs(q, items)?;
    t_matrix_for(&partition(q)?, items)
}

/// Tail-probability matrix over a given partition.
pub fn t_matrix_for(partition: &Partition, items: &ItemParams) -> Result<TMatrix> {
    let n_items = items.len();
    if n_items > MAX_TMATRIX_ITEMS {
        return Err(Error::TooManyItems(n_items));
    }
    let p = success_table(partition, items);
    let l = partition.len();
    let mut entries = vec![0.0; (1usize << n_items) * l];
    fill_block(&p, 0, n_items, &mut entries);
    Ok(TMatrix {
        entries,
        n_items,
        n_classes: l,
    })
}

/// Numeric rank of the DINA T-matrix; identifiable when it equals `L`.
pub fn identifiability_rank_check(q: &QMatrix, items: &ItemParams) -> Result<RankCheck> {
    check_inputs(q, items)?;
    rank_check_for(&partition(q)?, items, Exec::default())
}

/// Streams the rows through a chunked QR so the `2^J x L` matrix is never
/// held at once, then takes the singular values of the final `R`.
pub fn rank_check_for(partition: &Partition, items: &ItemParams, exec: Exec) -> Result<RankCheck> {
    let n_items = items.len();
    if n_items > MAX_TMATRIX_ITEMS {
        return Err(Error::TooManyItems(n_items));
    }
    let p = success_table(partition, items);
    let l = partition.len();
    let bits = n_items.min(CHUNK_BITS);
    let n_chunks = 1usize << (n_items - bits);
    let rs = exec.map_range(n_chunks, |chunk| {
        let mut block = vec![0.0; (1usize << bits) * l];
        fill_block(&p, chunk << bits, bits, &mut block);
        r_factor(&block, l)
    });
    let stacked: Vec<f64> = rs.into_iter().flatten().collect();
    let r = r_factor(&stacked, l);
    let rows = r.len() / l;
    let sv = DMatrix::from_row_slice(rows, l, &r).singular_values();
    let sigma_max = sv.iter().cloned().fold(0.0, f64::max);
    let threshold = sigma_max * (1u64 << n_items) as f64 * 64.0 * f64::EPSILON;
    let rank = sv.iter().filter(|&&s| s > threshold).count();
    Ok(RankCheck {
        identifiable: rank == l,
        rank,
        n_classes: l,
    })
}

/// Row-major `R` of a row-major block with `cols` columns.
fn r_factor(block: &[f64], cols: usize) -> Vec<f64> {
    let rows = block.len() / cols;
    let r = DMatrix::from_row_slice(rows, cols, block).qr().r();
    let mut out = Vec::with_capacity(r.nrows() * cols);
    for i in 0..r.nrows() {
        out.extend(r.row(i).iter());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn generic(j: usize) -> ItemParams {
        let slip = (0..j).map(|i| 0.05 + 0.23 * ((i * 7 % 11) as f64 / 11.0)).collect();
        let guess = (0..j).map(|i| 0.06 + 0.21 * ((i * 5 % 13) as f64 / 13.0)).collect();
        ItemParams::new(slip, guess).unwrap()
    }

    #[test]
    fn zero_row_is_ones_and_entries_are_probabilities() {
        let q = QMatrix::from_bit_strings(&["100", "110", "011"]).unwrap();
        let t = t_matrix(&q, &generic(3)).unwrap();
        assert!(t.row(0).iter().all(|&v| v == 1.0));
        assert!(t.entries.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn entries_match_direct_products() {
        let q = QMatrix::from_bit_strings(&["100", "110", "011", "001"]).unwrap();
        let items = generic(4);
        let part = partition(&q).unwrap();
        let t = t_matrix(&q, &items).unwrap();
        for x in 0..16 {
            for (c, class) in part.classes.iter().enumerate() {
                let mut prod = 1.0;
                for j in 0..4 {
                    if (x >> (3 - j)) & 1 == 1 {
                        prod *= items.success_prob(j, class.ideal.get(j));
                    }
                }
                assert_abs_diff_eq!(t.get(x, c), prod, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn single_item_row() {
        let q = QMatrix::from_bit_strings(&["1"]).unwrap();
        let items = ItemParams::new(vec![0.2], vec![0.15]).unwrap();
        let t = t_matrix(&q, &items).unwrap();
        // Classes in order [0], [1].
        assert_eq!(t.row(1), &[0.15, 0.8]);
    }

    #[test]
    fn ranks_of_small_designs() {
        let q1 = QMatrix::from_bit_strings(&["10", "01"]).unwrap();
        let r = identifiability_rank_check(&q1, &generic(2)).unwrap();
        assert_eq!((r.rank, r.n_classes, r.identifiable), (4, 4, true));
        let q3 = QMatrix::from_bit_strings(&["100", "110", "011"]).unwrap();
        let r = identifiability_rank_check(&q3, &generic(3)).unwrap();
        assert_eq!((r.rank, r.n_classes, r.identifiable), (5, 5, true));
    }

    #[test]
    fn uninformative_separator_drops_rank() {
        // Item 2 alone separates [10] from [11]; with 1 - s = g it carries nothing.
        let q = QMatrix::from_bit_strings(&["10", "11"]).unwrap();
        let items = ItemParams::new(vec![0.1, 0.25], vec![0.2, 0.75]).unwrap();
        let r = identifiability_rank_check(&q, &items).unwrap();
        assert!(r.rank < r.n_classes);
        assert!(!r.identifiable);
    }

    #[test]
    fn streamed_rank_matches_dense() {
        let rows: Vec<String> = (0..14)
            .map(|j| {
                let m = (j * 5 + 1) % 15 + 1;
                format!("{:04b}", m)
            })
            .collect();
        let q = QMatrix::from_bit_strings(&rows).unwrap();
        let items = generic(14);
        let part = partition(&q).unwrap();
        let dense = t_matrix(&q, &items).unwrap();
        let sv = DMatrix::from_row_slice(dense.n_rows(), dense.n_classes, &dense.entries).singular_values();
        let tol = sv.max() * (1u64 << 14) as f64 * 64.0 * f64::EPSILON;
        let dense_rank = sv.iter().filter(|&&s| s > tol).count();
        for exec in [Exec::Sequential, Exec::Parallel] {
            assert_eq!(rank_check_for(&part, &items, exec).unwrap().rank, dense_rank);
        }
    }

    #[test]
    fn csv_labels_rows_by_pattern() {
        let q = QMatrix::from_bit_strings(&["10", "01"]).unwrap();
        let part = partition(&q).unwrap();
        let t = t_matrix(&q, &generic(2)).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&part, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "pattern,00,01,10,11");
        assert!(lines[1].starts_with("00,1,1,1,1"));
        assert!(lines[4].starts_with("11,"));
    }

    #[test]
    fn too_many_items() {
        let q = QMatrix::from_bit_strings(&vec!["1"; 21]).unwrap();
        assert!(matches!(
            t_matrix(&q, &ItemParams::uniform(21, 0.1, 0.1).unwrap()),
            Err(Error::TooManyItems(21))
        ));
    }
}
