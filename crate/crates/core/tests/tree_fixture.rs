mod common;

use std::fs;

use common::*;
use debatetree::moderator::{synthesis_prompt, synthesis_tree_block};
use debatetree::tree::{DebateTree, NodeStatus, TreeError};

fn five() -> (String, DebateTree) {
    let text = fs::read_to_string(fixture("tree/five_node.json")).unwrap();
    let tree = DebateTree::from_json(&text).unwrap();
    (text, tree)
}

#[test]
fn fixture_shape() {
    let (_, tree) = five();
    assert_eq!(tree.len(), 5);
    let ids: Vec<&str> = tree.preorder().iter().map(|n| n.node_id.as_str()).collect();
    assert_eq!(ids, ["0", "0.1", "0.1.1", "0.2", "0.3"]);
    assert!(tree.audit().is_empty());
    assert!(tree.audit_finished().is_empty());
    assert_eq!(tree.node("0.1").unwrap().status, NodeStatus::Expanded);
}

#[test]
fn round_trip_is_identity() {
    let (text, tree) = five();
    assert_eq!(tree.to_json(), text);
    assert_eq!(DebateTree::from_json(&tree.to_json()).unwrap(), tree);
}

#[test]
fn render_goldens() {
    let (_, tree) = five();
    check_golden(
        &fixture("golden/tree/render.txt"),
        tree.render(None).unwrap().as_bytes(),
    )
    .unwrap();
    check_golden(
        &fixture("golden/tree/render_0.1.txt"),
        tree.render(Some("0.1")).unwrap().as_bytes(),
    )
    .unwrap();
    let root = tree.render(None).unwrap();
    assert_eq!(
        root.matches("Child Argument").count() + root.matches("Root Topic").count(),
        5
    );
}

#[test]
fn synthesis_prompt_golden() {
    let (_, tree) = five();
    let prompt = synthesis_prompt(&tree).unwrap();
    check_golden(&fixture("golden/tree/synthesis_prompt.txt"), prompt.as_bytes()).unwrap();
    let block = synthesis_tree_block(&tree);
    assert_eq!(block.matches("Author 0's argument:").count(), 4);
}

#[test]
fn inspect_cli_matches_golden() {
    let out = run_bin(&["inspect-tree", path_str(&fixture("tree/five_node.json"))]);
    assert!(out.status.success());
    assert_eq!(out.stdout, fs::read(fixture("golden/tree/render.txt")).unwrap());
    let out = run_bin(&[
        "inspect-tree",
        path_str(&fixture("tree/five_node.json")),
        "--node",
        "0.7",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("valid choices: 0.1, 0.2, 0.3"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn damaged_documents_are_rejected() {
    let (text, _) = five();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["version"] = 2.into();
    assert!(matches!(
        DebateTree::from_json(&v.to_string()),
        Err(TreeError::UnsupportedVersion { .. })
    ));

    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["nodes"][1]["depth"] = "one".into();
    match DebateTree::from_json(&v.to_string()) {
        Err(TreeError::Parse { path, .. }) => assert_eq!(path, "nodes[1].depth"),
        other => panic!("{other:?}"),
    }

    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["nodes"][2]["children"] = serde_json::json!(["0.1"]);
    assert!(matches!(
        DebateTree::from_json(&v.to_string()),
        Err(TreeError::Cycle { .. })
    ));

    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["extra"] = 1.into();
    assert!(DebateTree::from_json(&v.to_string()).is_err());
}
