//! CSV and JSON forms of a partition.
//!
//! CSV has the header `node,speed,size,projected_time`, one row per node, and a
//! trailing `# makespan=<value>` comment line. JSON is
//! `{"nodes":[{"node":0,"speed":1.0,"size":5,"projected_time":5.0},...],"makespan":5.0}`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{ClusterSpec, Partition};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionRow {
    pub node: usize,
    pub speed: f64,
    pub size: u64,
    pub projected_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub nodes: Vec<PartitionRow>,
    pub makespan: f64,
}

impl PartitionReport {
    pub fn new<S: Scalar>(spec: &ClusterSpec<S>, partition: &Partition<S>) -> Self {
        let nodes = partition
            .sizes()
            .iter()
            .zip(partition.projected_times())
            .enumerate()
            .map(|(node, (&size, t))| PartitionRow {
                node,
                speed: spec.speed(node).to_f64().unwrap_or(f64::NAN),
                size,
                projected_time: t.to_f64().unwrap_or(f64::NAN),
            })
            .collect();
        Self {
            nodes,
            makespan: partition.makespan().to_f64().unwrap_or(f64::NAN),
        }
    }

    pub fn sizes(&self) -> Vec<u64> {
        self.nodes.iter().map(|r| r.size).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> csv::Result<()> {
        {
            let mut w = csv::Writer::from_writer(&mut out);
            for row in &self.nodes {
                w.serialize(row)?;
            }
            w.flush()?;
        }
        writeln!(out, "# makespan={}", self.makespan)?;
        Ok(())
    }

    /// Reads the CSV form back. The makespan comment is optional; when it is
    /// missing the makespan is recomputed from the rows.
    pub fn read_csv<R: Read>(mut input: R) -> csv::Result<Self> {
        let mut text = String::new();
        input.read_to_string(&mut text)?;
        let mut makespan = None;
        for line in text.lines() {
            if let Some(v) = line.trim().strip_prefix("# makespan=") {
                makespan = v.trim().parse::<f64>().ok();
            }
        }
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let nodes: Vec<PartitionRow> = rdr.deserialize().collect::<Result<_, _>>()?;
        let makespan = makespan.unwrap_or_else(|| nodes.iter().map(|r| r.projected_time).fold(0.0, f64::max));
        Ok(Self { nodes, makespan })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost_model::CostFunction;
    use crate::partition::proportional;

    #[test]
    fn csv_round_trip() {
        let spec = ClusterSpec::uniform(&[1.0, 1.0], CostFunction::linear()).unwrap();
        let p = proportional(&spec, 10).unwrap();
        let report = PartitionReport::new(&spec, &p);
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("node,speed,size,projected_time\n0,1.0,5,5.0\n"));
        assert!(text.ends_with("# makespan=5\n"));
        let back = PartitionReport::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, report);
        assert_eq!(back.sizes(), vec![5, 5]);
    }

    #[test]
    fn json_shape() {
        let spec = ClusterSpec::uniform(&[1.0, 2.0], CostFunction::linear()).unwrap();
        let p = proportional(&spec, 9).unwrap();
        let v = serde_json::to_value(PartitionReport::new(&spec, &p)).unwrap();
        assert_eq!(v["nodes"][1]["size"], 6);
        assert_eq!(v["makespan"], 3.0);
    }
}
