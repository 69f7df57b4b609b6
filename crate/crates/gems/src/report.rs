//! JSON form of the evaluation report.

use gems_core::metrics::MetricReport;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub mmd_degree: f64,
    pub mmd_clustering: f64,
    pub mmd_nspdk: f64,
    pub mmd_node_label: f64,
    pub mmd_edge_label: f64,
    pub mmd_node_count: f64,
    pub mmd_edge_count: f64,
    pub nodes_reference: f64,
    pub nodes_predicted: f64,
    pub edges_reference: f64,
    pub edges_predicted: f64,
    pub obj_k: f64,
    pub trip_k: f64,
    pub mep: f64,
    pub mep_per_graph: Vec<f64>,
    pub mep_edgeless: usize,
    pub zsep: f64,
    pub zsep_no_novel_edges: bool,
    pub novelty: f64,
    pub diversity: f64,
    pub empty_histograms: usize,
}

impl From<&MetricReport> for ReportDoc {
    fn from(r: &MetricReport) -> Self {
        ReportDoc {
            mmd_degree: r.mmd_degree,
            mmd_clustering: r.mmd_clustering,
            mmd_nspdk: r.mmd_nspdk,
            mmd_node_label: r.mmd_node_label,
            mmd_edge_label: r.mmd_edge_label,
            mmd_node_count: r.mmd_node_count,
            mmd_edge_count: r.mmd_edge_count,
            nodes_reference: r.nodes_reference,
            nodes_predicted: r.nodes_predicted,
            edges_reference: r.edges_reference,
            edges_predicted: r.edges_predicted,
            obj_k: r.obj_k,
            trip_k: r.trip_k,
            mep: r.mep,
            mep_per_graph: r.mep_per_graph.clone(),
            mep_edgeless: r.mep_edgeless,
            zsep: r.zsep,
            zsep_no_novel_edges: r.zsep_no_novel_edges,
            novelty: r.novelty,
            diversity: r.diversity,
            empty_histograms: r.empty_histograms,
        }
    }
}

impl From<ReportDoc> for MetricReport {
    fn from(d: ReportDoc) -> Self {
        MetricReport {
            mmd_degree: d.mmd_degree,
            mmd_clustering: d.mmd_clustering,
            mmd_nspdk: d.mmd_nspdk,
            mmd_node_label: d.mmd_node_label,
            mmd_edge_label: d.mmd_edge_label,
            mmd_node_count: d.mmd_node_count,
            mmd_edge_count: d.mmd_edge_count,
            nodes_reference: d.nodes_reference,
            nodes_predicted: d.nodes_predicted,
            edges_reference: d.edges_reference,
            edges_predicted: d.edges_predicted,
            obj_k: d.obj_k,
            trip_k: d.trip_k,
            mep: d.mep,
            mep_per_graph: d.mep_per_graph,
            mep_edgeless: d.mep_edgeless,
            zsep: d.zsep,
            zsep_no_novel_edges: d.zsep_no_novel_edges,
            novelty: d.novelty,
            diversity: d.diversity,
            empty_histograms: d.empty_histograms,
        }
    }
}

/// Pretty-printed report with a trailing newline.
pub fn report_to_json(r: &MetricReport) -> String {
    let mut s = serde_json::to_string_pretty(&ReportDoc::from(r)).expect("reports always serialize");
    s.push('\n');
    s
}

pub fn report_from_json(text: &str) -> Result<MetricReport, serde_json::Error> {
    serde_json::from_str::<ReportDoc>(text).map(MetricReport::from)
}
