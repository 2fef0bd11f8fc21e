use commsearch::io::{self, Dataset};
use commsearch::persist::{self, PolicyFile};
use commsearch_core::encoder::EncoderModel;
use commsearch_core::fixtures;
use commsearch_core::refiner::{PolicyModel, StateContext};
use commsearch_core::synthetic::{gen_synthetic, SyntheticSpec};
use commsearch_core::CommunitySet;

fn spec(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        blocks: 3,
        block_size: 15,
        p_in: 0.3,
        p_out: 0.02,
        k: 9,
        attrs_per_block: 3,
        attr_noise: 0.1,
        seed,
    }
}

#[test]
fn graph_and_communities_survive_a_disk_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (e, a, c) = (dir.path().join("g.edges"), dir.path().join("g.attrs"), dir.path().join("g.comms"));
    for seed in [1, 2, 3] {
        let (g, truth) = gen_synthetic(&spec(seed)).unwrap();
        let data = Dataset::from_graph(g.clone());
        io::save_graph(&data, &e, &a).unwrap();
        io::save_communities(&truth, &data, &c).unwrap();
        let back = io::load_graph(&e, &a).unwrap();
        assert_eq!(back.graph, g);
        assert_eq!(back.ids, data.ids);
        assert_eq!(io::load_communities(&c, &back).unwrap(), truth);
    }
}

#[test]
fn relabeled_ids_round_trip_through_the_id_map() {
    let dir = tempfile::tempdir().unwrap();
    let (e, a, c) = (dir.path().join("e"), dir.path().join("a"), dir.path().join("c"));
    std::fs::write(&e, "100 7\n7 42\n42 100\n5 100\n").unwrap();
    std::fs::write(&a, "k=3\n42 2\n100 0 1\n").unwrap();
    std::fs::write(&c, "100 7 42\n5\n").unwrap();
    let first = io::load_graph(&e, &a).unwrap();
    assert_eq!(first.ids, vec![42, 100, 7, 5]);
    let set = io::load_communities(&c, &first).unwrap();
    io::save_graph(&first, &e, &a).unwrap();
    io::save_communities(&set, &first, &c).unwrap();
    let second = io::load_graph(&e, &a).unwrap();
    assert_eq!(second.graph, first.graph);
    assert_eq!(second.ids, first.ids);
    assert_eq!(io::load_communities(&c, &second).unwrap(), set);
}

#[test]
fn worked_example_graph_loads_with_its_attribute_degree() {
    let dir = tempfile::tempdir().unwrap();
    let (e, a) = (dir.path().join("e"), dir.path().join("a"));
    std::fs::write(&e, "0 1\n0 3\n0 5\n0 6\n1 3\n1 2\n1 4\n3 2\n3 4\n5 6\n2 4\n").unwrap();
    // Columns: CS, ML, DB, DM, IR.
    std::fs::write(&a, "k=5\n0 0 1\n1 0\n2 2 4\n3 0 1\n4 3 4\n5 0 2\n6 0 3\n").unwrap();
    let data = io::load_graph(&e, &a).unwrap();
    assert_eq!(data.graph, fixtures::figure_two());
    assert_eq!(data.graph.attribute_degree(0), 5);
    assert_eq!(data.graph.shared_attributes(0, 3), 2);
}

#[test]
fn empty_community_file_is_an_empty_set() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("c");
    std::fs::write(&c, "").unwrap();
    let data = Dataset::from_graph(fixtures::star(3));
    assert_eq!(io::load_communities(&c, &data).unwrap(), CommunitySet::default());
}

#[test]
fn models_survive_a_disk_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    let encoder = EncoderModel::new(9, 7, 5, 0.3, 4).unwrap();
    persist::save_encoder(&encoder, &path).unwrap();
    assert_eq!(persist::load_encoder(&path).unwrap(), encoder);

    let file = PolicyFile { policy: PolicyModel::new(7, 8, 2).unwrap(), context: StateContext::Anchored };
    persist::save_policy(&file, &path).unwrap();
    assert_eq!(persist::load_policy(&path).unwrap(), file);
    assert!(persist::load_encoder(&path).is_err());
    assert!(persist::load_encoder(&dir.path().join("missing")).is_err());
}
