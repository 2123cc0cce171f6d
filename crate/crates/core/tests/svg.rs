use fairmap::features::{feature_table, FeatureCaps};
use fairmap::generators::gen_preset;
use fairmap::pipeline::plot_points;
use fairmap::render::{render_svg, ColorBy, RenderSpec};
use fairmap::spectral::explicit_coords;

fn markers<'a>(doc: &'a roxmltree::Document<'a>) -> Vec<roxmltree::Node<'a, 'a>> {
    doc.descendants()
        .filter(|n| n.attribute("class") == Some("marker"))
        .collect()
}

fn title(node: roxmltree::Node) -> String {
    node.children()
        .find(|c| c.has_tag_name("title"))
        .and_then(|t| t.text())
        .unwrap_or_default()
        .to_string()
}

#[test]
fn explicit_map_of_five_by_five_preset() {
    let records = gen_preset("5x5", 3).unwrap();
    let coords: Vec<(String, [f64; 2])> = explicit_coords(&records)
        .into_iter()
        .map(|(l, p)| (l, [p.sigma2, p.sigma1]))
        .collect();
    let features = feature_table(&records, FeatureCaps::default());
    let spec = RenderSpec {
        title: "explicit <5x5> & more".into(),
        color: ColorBy::Feature("ef_exists".into()),
        explicit: Some((5, 5)),
    };
    let svg = render_svg(&plot_points(&coords, Some(&records), Some(&features)), &spec).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.root_element().attribute("version"), Some("1.1"));

    let marks = markers(&doc);
    assert_eq!(marks.len(), records.len());
    let con = marks.iter().find(|n| title(**n) == "CON").expect("CON marker");
    let x: f64 = con.attribute("data-x").unwrap().parse().unwrap();
    let y: f64 = con.attribute("data-y").unwrap().parse().unwrap();
    assert!(x.abs() <= 1e-9 && (y - 5f64.sqrt()).abs() <= 1e-9, "({x}, {y})");

    for (node, f) in marks.iter().zip(&features) {
        assert_eq!(title(*node), f.label);
        let cross = node.attribute("data-shape") == Some("cross");
        assert_eq!(cross, f.minimax_envy.unwrap() <= 1e-9, "{}", f.label);
    }
    let boundaries: Vec<&str> = doc
        .descendants()
        .filter(|n| n.attribute("class") == Some("boundary"))
        .filter_map(|n| n.attribute("data-boundary"))
        .collect();
    for b in ["west", "south", "north", "east"] {
        assert!(boundaries.contains(&b), "{b}");
    }
}

#[test]
fn source_coloring_marks_characteristic_instances_with_stars() {
    let records = gen_preset("3x6", 0).unwrap();
    let coords: Vec<(String, [f64; 2])> = records
        .iter()
        .enumerate()
        .map(|(i, r)| (r.label.clone(), [i as f64, 0.0]))
        .collect();
    let spec = RenderSpec {
        title: "t".into(),
        color: ColorBy::Source,
        explicit: None,
    };
    let svg = render_svg(&plot_points(&coords, Some(&records), None), &spec).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let marks = markers(&doc);
    assert_eq!(marks.len(), records.len());
    for (node, r) in marks.iter().zip(&records) {
        let star = node.attribute("data-shape") == Some("star");
        assert_eq!(star, r.source.is_characteristic(), "{}", r.label);
    }
    assert!(doc.descendants().all(|n| n.attribute("class") != Some("boundary")));
}
