use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use anoflip_core::fatgraph::{family_xn, two_holed_torus_example, FatGraph};
use anoflip_core::flow_numerics::{
    cone_expansion, integrate_field, transit_dz_exact, transit_time_exact, verify_block_properties, ConeParams,
    GridSpec, IntegrationConfig, NumericsError, Termination,
};
use anoflip_core::manifold_assembly::{
    apply_flip, build_flow, check_transitive, classify as classify_flows, construction_7_3, free_homotopy_compare,
    orbit_equivalence_search, periodic_itineraries, self_glued_flow, AssemblyError, GluedFlow, Gluing, GluingSpec,
    HomotopyVerdict, Matrix, SearchOutcome, TorusRef, SWAP_MATRIX,
};
use anoflip_core::model_block::HALF_PI;
use anoflip_core::seifert_piece::{build_piece, SeifertPiece};
use anoflip_core::{BlockField, Role, Sign, SCHEMA_VERSION};

use crate::{read_input, BuildArgs, ConeArgs, ExampleName, Expect, FieldArgs, IntegrateArgs, Output};

pub const SCHEMA_HINT: &str = "\
inputs are JSON documents with \"schema_version\": 1
  fatgraph: {\"vertices\": [{\"id\", \"darts\": [..]}], \"edges\": [[d, d'], ..], \"markings\"?: {id: marking}, \"roles\"?: {face: \"in\" | \"out\"}}
  piece:    {\"fatgraph\": .., \"block_sign\": 1 | -1, \"lambda\": ..}
  flow:     {\"pieces\": [piece, ..], \"gluings\": [{\"from\": [piece, torus], \"to\": [piece, torus], \"matrix\": [[a, b], [c, d]]}], \"seed\"?}
run `anoflip <command> --help` for flags";

enum Document {
    Graph(FatGraph),
    Piece(SeifertPiece),
    Flow(GluedFlow),
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn parse_document(text: &str) -> Result<Document> {
    let v: Value = serde_json::from_str(text).context("input is not JSON")?;
    let obj = v.as_object().ok_or_else(|| anyhow!("input must be a JSON object"))?;
    if obj.contains_key("gluings") {
        Ok(Document::Flow(GluedFlow::from_json(text)?))
    } else if obj.contains_key("block_sign") {
        Ok(Document::Piece(SeifertPiece::from_json(text)?))
    } else {
        Ok(Document::Graph(FatGraph::from_json(text)?))
    }
}

fn parse_flow(text: &str) -> Result<GluedFlow> {
    match parse_document(text)? {
        Document::Flow(f) => Ok(f),
        _ => bail!("expected a flow document"),
    }
}

fn load_flow(path: &PathBuf) -> Result<GluedFlow> {
    let text = if path.as_os_str() == "-" {
        read_input(None)?
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
    };
    parse_flow(&text).with_context(|| format!("in {}", path.display()))
}

fn sign_of(s: i64) -> Result<Sign> {
    Sign::from_int(s).ok_or_else(|| anyhow!("--sign must be 1 or -1, got {s}"))
}

fn field(a: &FieldArgs) -> Result<BlockField> {
    Ok(BlockField::new(sign_of(a.sign)?, a.lambda)?)
}

fn parse_list(s: &str) -> Result<Vec<u32>> {
    s.split(',').map(|t| t.trim().parse::<u32>().with_context(|| format!("bad index {t:?}"))).collect()
}

fn xn_graphs(s: &str) -> Result<Vec<FatGraph>> {
    parse_list(s)?.into_iter().map(|n| Ok(family_xn(n)?)).collect()
}

pub fn validate(text: &str) -> Result<Output> {
    let v: Value = serde_json::from_str(text).context("input is not JSON")?;
    if v.get("gluings").is_some() {
        return match GluedFlow::from_json(text) {
            Ok(f) => Ok(Output::ok(pretty(&json!({
                "kind": "flow",
                "ok": true,
                "pieces": f.pieces().len(),
                "gluings": f.gluing().len(),
                "transitive": check_transitive(&f),
            })))),
            Err(AssemblyError::InvalidGluing(violations)) => Ok(Output {
                text: pretty(&json!({ "kind": "flow", "ok": false, "violations": violations })),
                positive: false,
            }),
            Err(e) => Err(e.into()),
        };
    }
    match parse_document(text)? {
        Document::Piece(p) => Ok(Output::ok(pretty(&json!({
            "kind": "piece",
            "ok": true,
            "block_sign": p.block_sign(),
            "regular": p.is_regular(),
            "boundary_tori": p.boundary_tori().len(),
        })))),
        Document::Graph(g) => {
            let violations = g.validate_admissible().err().unwrap_or_default();
            let faces = g.trace_boundary_faces();
            let roles: Vec<Option<Role>> = faces.iter().map(|f| f.role).collect();
            let ok = violations.is_empty();
            Ok(Output {
                text: pretty(&json!({
                    "kind": "fatgraph",
                    "ok": ok,
                    "vertices": g.vertex_count(),
                    "edges": g.edge_count(),
                    "faces": faces.len(),
                    "face_roles": roles,
                    "genus": g.genus(),
                    "violations": violations,
                })),
                positive: ok,
            })
        }
        Document::Flow(_) => unreachable!("flows handled above"),
    }
}

pub fn build(a: &BuildArgs) -> Result<Output> {
    if let Some(list) = &a.xn {
        let f = construction_7_3(&xn_graphs(list)?, a.seed, a.field.lambda)?;
        return Ok(Output::ok(f.to_json()));
    }
    let g = match parse_document(&read_input(a.input.as_ref())?)? {
        Document::Graph(g) => g,
        _ => bail!("build expects a fatgraph document"),
    };
    let p = build_piece(&g, sign_of(a.field.sign)?, a.field.lambda)?;
    if a.self_glue {
        Ok(Output::ok(self_glued_flow(p)?.to_json()))
    } else {
        Ok(Output::ok(p.to_json()))
    }
}

pub fn flip(text: &str, piece: usize) -> Result<Output> {
    Ok(Output::ok(apply_flip(&parse_flow(text)?, piece)?.to_json()))
}

pub fn compare(first: &PathBuf, second: &PathBuf, max_len: usize) -> Result<Output> {
    let verdict = free_homotopy_compare(&load_flow(first)?, &load_flow(second)?, max_len)?;
    let positive = verdict == HomotopyVerdict::Equal;
    Ok(Output { text: pretty(&verdict), positive })
}

pub fn classify(inputs: &[PathBuf], max_len: usize) -> Result<Output> {
    let flows = inputs.iter().map(load_flow).collect::<Result<Vec<_>>>()?;
    let classes = classify_flows(&flows, max_len)?;
    let listed: Vec<Value> = classes
        .iter()
        .map(|c| {
            json!({
                "signs": flows[c[0]].signs().0,
                "members": c.iter().map(|i| inputs[*i].display().to_string()).collect::<Vec<_>>(),
            })
        })
        .collect();
    Ok(Output::ok(pretty(&json!({ "classes": listed.len(), "members": listed }))))
}

pub fn search(first: &PathBuf, second: &PathBuf, expect: Option<Expect>) -> Result<Output> {
    let outcome = orbit_equivalence_search(&load_flow(first)?, &load_flow(second)?);
    let got = match outcome {
        SearchOutcome::Found { .. } => Expect::Found,
        SearchOutcome::Exhausted => Expect::Exhausted,
    };
    Ok(Output { text: pretty(&outcome), positive: expect.is_none_or(|e| e == got) })
}

pub fn transitive(text: &str) -> Result<Output> {
    let f = parse_flow(text)?;
    let t = check_transitive(&f);
    let graph = f.transit_graph();
    Ok(Output { text: pretty(&json!({ "transitive": t, "cells": graph.cells.len() })), positive: t })
}

pub fn itineraries(text: &str, max_len: usize) -> Result<Output> {
    let its = periodic_itineraries(&parse_flow(text)?, max_len);
    Ok(Output::ok(pretty(&json!({ "max_len": max_len, "count": its.len(), "itineraries": its }))))
}

pub fn integrate(a: &IntegrateArgs) -> Result<Output> {
    let b = field(&a.field)?;
    let y = a.y.unwrap_or(-HALF_PI);
    let p0 = anoflip_core::BlockPoint::new(a.x, y, a.z)?;
    let cfg = IntegrationConfig { stride: a.stride.max(1), ..IntegrationConfig::new(a.dt, a.t_max) };
    let traj = integrate_field(&b, (p0.x, p0.y, p0.z), &cfg, true)?;
    if a.csv {
        let mut buf = Vec::new();
        traj.write_csv(&mut buf)?;
        return Ok(Output::ok(String::from_utf8(buf)?));
    }
    let mut report = json!({
        "schema_version": SCHEMA_VERSION,
        "lambda": b.lambda(),
        "sign": b.sign(),
        "entry": p0,
        "dt": a.dt,
        "termination": traj.termination,
        "samples": traj.samples.len(),
    });
    if let Termination::ExitFace { time, z_lift, .. } = traj.termination {
        report["time"] = json!(time);
        report["dz"] = json!(z_lift - p0.z);
        if y == -HALF_PI {
            report["time_exact"] = json!(transit_time_exact(a.x));
            report["dz_exact"] = json!(transit_dz_exact(&b, a.x));
        }
    }
    Ok(Output::ok(pretty(&report)))
}

fn parse_matrix(s: &str) -> Result<Matrix> {
    let v: Vec<i64> = s
        .split(',')
        .map(|t| t.trim().parse::<i64>().with_context(|| format!("bad matrix entry {t:?}")))
        .collect::<Result<_>>()?;
    if v.len() != 4 {
        bail!("--matrix takes four entries a,b,c,d");
    }
    Ok([[v[0], v[1]], [v[2], v[3]]])
}

fn parse_grid(s: &str) -> Result<GridSpec> {
    let parts: Vec<&str> = s.split('x').collect();
    let num = |t: &str| t.trim().parse::<usize>().with_context(|| format!("bad grid size {t:?}"));
    match parts.as_slice() {
        [nx] => Ok(GridSpec { nx: num(nx)?, nz: 1 }),
        [nx, nz] => Ok(GridSpec { nx: num(nx)?, nz: num(nz)? }),
        _ => bail!("--grid takes NX or NXxNZ"),
    }
}

pub fn cone_check(a: &ConeArgs) -> Result<Output> {
    let b = field(&a.field)?;
    let defaults = ConeParams::default();
    let params = ConeParams {
        grid: parse_grid(&a.grid)?,
        cone_halfwidth: a.halfwidth,
        threshold: a.threshold,
        integration: IntegrationConfig { dt: a.dt, ..defaults.integration },
    };
    let matrix = parse_matrix(&a.matrix)?;
    let report = match cone_expansion(&b, &matrix, &params) {
        Ok(r) => r,
        Err(NumericsError::FiberGluedToFiber) => {
            return Ok(Output {
                text: pretty(&json!({ "matrix": matrix, "violation": "fiber_glued_to_fiber" })),
                positive: false,
            })
        }
        Err(e) => return Err(e.into()),
    };
    let positive = report.verdict;
    if a.csv {
        let mut buf = Vec::new();
        report.write_csv(&mut buf)?;
        return Ok(Output { text: String::from_utf8(buf)?, positive });
    }
    Ok(Output { text: pretty(&report), positive })
}

pub fn verify_block(a: &FieldArgs, grid: usize, tol: f64) -> Result<Output> {
    let list = verify_block_properties(&field(a)?, grid, tol);
    let positive = list.all_passed();
    Ok(Output {
        text: pretty(
            &json!({ "lambda": a.lambda, "sign": a.sign, "grid": grid, "passed": positive, "checks": list.checks }),
        ),
        positive,
    })
}

/// Two copies of the two-holed-torus piece, each Out torus glued to the
/// other piece's In torus of the same index by the swap.
pub fn two_torus_flow(lambda: f64) -> Result<GluedFlow> {
    let p = build_piece(&two_holed_torus_example(), Sign::Plus, lambda)?;
    let mut gluings = Vec::new();
    let of_role = |r: Role| -> Vec<usize> {
        p.boundary_tori().iter().enumerate().filter(|(_, t)| t.role == r).map(|(k, _)| k).collect()
    };
    let (outs, ins) = (of_role(Role::Out), of_role(Role::In));
    for (i, j) in [(0, 1), (1, 0)] {
        for (o, n) in outs.iter().zip(&ins) {
            gluings.push(Gluing {
                from: TorusRef { piece: i, torus: *o },
                to: TorusRef { piece: j, torus: *n },
                matrix: SWAP_MATRIX,
            });
        }
    }
    Ok(build_flow(vec![p.clone(), p], GluingSpec::new(gluings))?)
}

pub fn example(name: ExampleName, n: &str, seed: u64, lambda: f64) -> Result<Output> {
    let text = match name {
        ExampleName::TwoHoledTorus => two_holed_torus_example().to_json(),
        ExampleName::Xn => {
            let list = parse_list(n)?;
            let [k] = list.as_slice() else { bail!("--n takes a single index for xn") };
            family_xn(*k)?.to_json()
        }
        ExampleName::TwoTorusFlow => two_torus_flow(lambda)?.to_json(),
        ExampleName::Construction => construction_7_3(&xn_graphs(n)?, seed, lambda)?.to_json(),
    };
    Ok(Output::ok(text))
}
