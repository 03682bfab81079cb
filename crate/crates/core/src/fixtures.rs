use crate::corpus::{parse_acos_line, AcosFormat, CategorySet, DependencyEdge, PolarityMap};
use crate::syntax::SentenceGraph;

pub(crate) const WORKED_LINE: &str = "service ok but unfriendly , filthy bathroom .\t0,1 SERVICE#GENERAL 0 1,2\t0,1 SERVICE#GENERAL 0 3,4\t6,7 AMBIENCE#GENERAL 0 5,6";

/// The worked restaurant sentence with a UD-style parse.
pub(crate) fn worked_graph() -> SentenceGraph {
    let fmt = AcosFormat::new(PolarityMap::default(), CategorySet::restaurant());
    let sentence = parse_acos_line(WORKED_LINE, 1, &fmt).unwrap();
    let edges = vec![
        DependencyEdge::new(0, 1, "root"),
        DependencyEdge::new(1, 2, "amod"),
        DependencyEdge::new(7, 3, "cc"),
        DependencyEdge::new(7, 4, "amod"),
        DependencyEdge::new(6, 5, "punct"),
        DependencyEdge::new(7, 6, "amod"),
        DependencyEdge::new(1, 7, "conj"),
        DependencyEdge::new(1, 8, "punct"),
    ];
    SentenceGraph::new(sentence, edges).unwrap()
}

/// The same sentence without annotations.
pub(crate) fn unannotated_graph() -> SentenceGraph {
    worked_graph().with_quads(vec![]).unwrap()
}
