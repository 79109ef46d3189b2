use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Vector;

/// Samples on the uniform grid `t0 + k h` with the input actually applied at
/// each node and any number of named scalar side channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    t0: f64,
    h: f64,
    pub states: Vec<Vector>,
    pub inputs: Vec<Vector>,
    pub outputs: Vec<Vector>,
    pub aux: Vec<(String, Vec<f64>)>,
}

impl Trajectory {
    pub fn with_capacity(t0: f64, h: f64, nodes: usize) -> Self {
        Self {
            t0,
            h,
            states: Vec::with_capacity(nodes),
            inputs: Vec::with_capacity(nodes),
            outputs: Vec::with_capacity(nodes),
            aux: Vec::new(),
        }
    }

    pub fn push(&mut self, x: Vector, u: Vector, y: Vector) {
        self.states.push(x);
        self.inputs.push(u);
        self.outputs.push(y);
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.h
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    /// First node with `t_k >= t` (clamped to the last node).
    pub fn index_at(&self, t: f64) -> usize {
        let k = ((t - self.t0) / self.h - 1e-9).ceil().max(0.0) as usize;
        k.min(self.len().saturating_sub(1))
    }

    pub fn state_dim(&self) -> usize {
        self.states.first().map_or(0, |x| x.len())
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.first().map_or(0, |x| x.len())
    }

    pub fn output_dim(&self) -> usize {
        self.outputs.first().map_or(0, |x| x.len())
    }

    pub fn state_component(&self, j: usize) -> Vec<f64> {
        self.states.iter().map(|x| x[j]).collect()
    }

    pub fn input_component(&self, j: usize) -> Vec<f64> {
        self.inputs.iter().map(|x| x[j]).collect()
    }

    pub fn output_component(&self, j: usize) -> Vec<f64> {
        self.outputs.iter().map(|x| x[j]).collect()
    }

    /// Adds or replaces a named side channel.
    pub fn set_aux(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::Dimension(format!(
                "aux channel `{name}` has {} samples, trajectory has {}",
                values.len(),
                self.len()
            )));
        }
        match self.aux.iter_mut().find(|(n, _)| n == name) {
            Some((_, v)) => *v = values,
            None => self.aux.push((name.to_string(), values)),
        }
        Ok(())
    }

    /// Adds one channel per component, named `{prefix}_{j}` (1-based).
    pub fn set_aux_vectors(&mut self, prefix: &str, values: &[Vector]) -> Result<()> {
        let dim = values.first().map_or(0, |v| v.len());
        for j in 0..dim {
            self.set_aux(
                &format!("{prefix}_{}", j + 1),
                values.iter().map(|v| v[j]).collect(),
            )?;
        }
        Ok(())
    }

    pub fn aux(&self, name: &str) -> Option<&[f64]> {
        self.aux
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn header(&self) -> Vec<String> {
        let mut cols = vec!["t".to_string()];
        cols.extend((1..=self.state_dim()).map(|j| format!("x_{j}")));
        cols.extend((1..=self.output_dim()).map(|j| format!("y_{j}")));
        cols.extend((1..=self.input_dim()).map(|j| format!("u_{j}")));
        cols.extend(self.aux.iter().map(|(n, _)| n.clone()));
        cols
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.header())?;
        let mut row = Vec::new();
        for k in 0..self.len() {
            row.clear();
            row.push(fmt_f64(self.time(k)));
            row.extend(self.states[k].iter().map(|v| fmt_f64(*v)));
            row.extend(self.outputs[k].iter().map(|v| fmt_f64(*v)));
            row.extend(self.inputs[k].iter().map(|v| fmt_f64(*v)));
            row.extend(self.aux.iter().map(|(_, v)| fmt_f64(v[k])));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Reads a trajectory written by [`Trajectory::write_csv`]. Columns named
    /// `x_j`, `y_j`, `u_j` with integer `j` are state, output and input
    /// channels; everything after `t` that does not match is auxiliary.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.first().map(String::as_str) != Some("t") {
            return Err(Error::Config(
                "trajectory CSV must start with a `t` column".into(),
            ));
        }
        let slot = |name: &str, prefix: &str| -> Option<usize> {
            name.strip_prefix(prefix)?
                .parse::<usize>()
                .ok()
                .filter(|&j| j >= 1)
        };
        let (mut xs, mut ys, mut us, mut aux) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (col, name) in header.iter().enumerate().skip(1) {
            if let Some(j) = slot(name, "x_") {
                xs.push((j, col));
            } else if let Some(j) = slot(name, "y_") {
                ys.push((j, col));
            } else if let Some(j) = slot(name, "u_") {
                us.push((j, col));
            } else {
                aux.push((name.clone(), col));
            }
        }
        for cols in [&mut xs, &mut ys, &mut us] {
            cols.sort();
        }
        let mut times = Vec::new();
        let mut traj = Trajectory::with_capacity(0.0, 1.0, 0);
        let mut aux_values: Vec<Vec<f64>> = vec![Vec::new(); aux.len()];
        for record in r.records() {
            let record = record?;
            let num = |col: usize| -> Result<f64> {
                record[col].trim().parse::<f64>().map_err(|e| {
                    Error::Config(format!(
                        "bad number `{}` in column {col}: {e}",
                        &record[col]
                    ))
                })
            };
            times.push(num(0)?);
            let pick = |cols: &[(usize, usize)]| -> Result<Vector> {
                let vals = cols
                    .iter()
                    .map(|&(_, c)| num(c))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Vector::from_vec(vals))
            };
            traj.push(pick(&xs)?, pick(&us)?, pick(&ys)?);
            for (slot, (_, col)) in aux_values.iter_mut().zip(&aux) {
                slot.push(num(*col)?);
            }
        }
        traj.t0 = times.first().copied().unwrap_or(0.0);
        traj.h = if times.len() > 1 {
            times[1] - times[0]
        } else {
            1.0
        };
        traj.aux = aux.into_iter().map(|(n, _)| n).zip(aux_values).collect();
        Ok(traj)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::vector;

    #[test]
    fn csv_round_trip() {
        let mut traj = Trajectory::with_capacity(0.5, 0.1, 3);
        for k in 0..3 {
            let v = k as f64 / 3.0;
            traj.push(vector(&[v, -v]), vector(&[1.0 / 7.0]), vector(&[v * 2.0]));
        }
        traj.set_aux("u_eps_1", vec![0.1, 0.2, std::f64::consts::PI])
            .unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x_1,x_2,y_1,u_1,u_eps_1\n"));
        let back = Trajectory::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.states, traj.states);
        assert_eq!(back.inputs, traj.inputs);
        assert_eq!(back.outputs, traj.outputs);
        assert_eq!(back.aux, traj.aux);
    }

    #[test]
    fn aux_length_is_checked() {
        let mut traj = Trajectory::with_capacity(0.0, 1.0, 1);
        traj.push(vector(&[1.0]), vector(&[]), vector(&[]));
        assert!(traj.set_aux("a", vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn index_lookup() {
        let mut traj = Trajectory::with_capacity(0.0, 0.1, 11);
        for _ in 0..11 {
            traj.push(vector(&[0.0]), vector(&[]), vector(&[]));
        }
        assert_eq!(traj.index_at(0.3), 3);
        assert_eq!(traj.index_at(0.31), 4);
        assert_eq!(traj.index_at(5.0), 10);
    }
}
