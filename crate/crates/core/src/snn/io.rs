//! Graph serialization.
//!
//! Text form (`#` starts a comment, blank lines ignored):
//!
//! ```text
//! unispike-graph 1
//! neurons <N>
//! frac_bits <F>
//! tagged <yes|no>
//! model <index> <json model descriptor>
//! neuron <id> <model index> [<layer> <channel> <x> <y>]
//! synapse <pre> <post> <raw weight>
//! ```
//!
//! Every neuron has exactly one `neuron` line, in id order. Raw weights are
//! the signed 16-bit fixed-point integers.
//!
//! Binary form, all integers little-endian:
//!
//! ```text
//! magic "USNG" | version u16 | frac_bits u8 | tagged u8 | neurons u32 | models u16
//! models:   kind u8, then f64 fields (LIF: tau_m v_rest v_th v_reset + u32 refractory;
//!           Izhikevich: a b c d; AdEx: c_m g_l e_l v_t delta_t a b tau_w v_th v_reset)
//! neurons:  model u16 [layer u16 channel u16 x u16 y u16]
//! synapses: per neuron in id order: count u32, then count x (post u32, weight i16)
//! ```

use std::io::{BufRead, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{AdExParams, IzhikevichParams, LayerTag, LifParams, NeuronId, NeuronModel, SnnGraph, Synapse, Weight};
use crate::error::{Error, Result};

const TEXT_MAGIC: &str = "unispike-graph";
const BIN_MAGIC: &[u8; 4] = b"USNG";
const VERSION: u16 = 1;

pub fn write_graph_text<W: Write>(graph: &SnnGraph, mut w: W) -> Result<()> {
    writeln!(w, "{TEXT_MAGIC} {VERSION}")?;
    writeln!(w, "neurons {}", graph.neuron_count())?;
    writeln!(w, "frac_bits {}", graph.frac_bits())?;
    writeln!(w, "tagged {}", if graph.tags().is_some() { "yes" } else { "no" })?;
    for (i, m) in graph.models().iter().enumerate() {
        writeln!(w, "model {i} {}", serde_json::to_string(m)?)?;
    }
    for n in graph.neurons() {
        write!(w, "neuron {} {}", n.0, graph.model_index(n))?;
        if let Some(t) = graph.tag(n) {
            write!(w, " {} {} {} {}", t.layer, t.channel, t.x, t.y)?;
        }
        writeln!(w)?;
    }
    for pre in graph.neurons() {
        for s in graph.outgoing(pre) {
            writeln!(w, "synapse {} {} {}", pre.0, s.post.0, s.weight.0)?;
        }
    }
    Ok(())
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        what: "graph text",
        line,
        msg: msg.into(),
    }
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, name: &str) -> Result<T> {
    tok.ok_or_else(|| parse_err(line, format!("missing {name}")))?
        .parse()
        .map_err(|_| parse_err(line, format!("bad {name}")))
}

pub fn read_graph_text<R: BufRead>(r: R) -> Result<SnnGraph> {
    let mut neurons: Option<usize> = None;
    let mut frac_bits: Option<u8> = None;
    let mut tagged: Option<bool> = None;
    let mut models = Vec::new();
    let mut model_of = Vec::new();
    let mut tags = Vec::new();
    let mut synapses: Vec<Vec<Synapse>> = Vec::new();
    let mut saw_magic = false;

    for (i, line) in r.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
        let mut toks = rest.split_whitespace();
        if !saw_magic {
            if key != TEXT_MAGIC || field::<u16>(toks.next(), lineno, "version")? != VERSION {
                return Err(parse_err(lineno, "missing or unsupported header"));
            }
            saw_magic = true;
            continue;
        }
        match key {
            "neurons" => {
                let n: usize = field(toks.next(), lineno, "neuron count")?;
                neurons = Some(n);
                synapses = vec![Vec::new(); n];
            }
            "frac_bits" => frac_bits = Some(field(toks.next(), lineno, "frac_bits")?),
            "tagged" => {
                tagged = Some(match toks.next() {
                    Some("yes") => true,
                    Some("no") => false,
                    _ => return Err(parse_err(lineno, "tagged must be yes or no")),
                })
            }
            "model" => {
                let (idx, json) = rest
                    .trim()
                    .split_once(' ')
                    .ok_or_else(|| parse_err(lineno, "model needs index and descriptor"))?;
                let idx: usize = field(Some(idx), lineno, "model index")?;
                if idx != models.len() {
                    return Err(parse_err(lineno, "models must be listed in index order"));
                }
                let m: NeuronModel = serde_json::from_str(json).map_err(|e| parse_err(lineno, e.to_string()))?;
                models.push(m);
            }
            "neuron" => {
                let id: usize = field(toks.next(), lineno, "neuron id")?;
                if id != model_of.len() {
                    return Err(parse_err(lineno, "neurons must be listed in id order"));
                }
                model_of.push(field(toks.next(), lineno, "model index")?);
                if tagged == Some(true) {
                    tags.push(LayerTag {
                        layer: field(toks.next(), lineno, "layer")?,
                        channel: field(toks.next(), lineno, "channel")?,
                        x: field(toks.next(), lineno, "x")?,
                        y: field(toks.next(), lineno, "y")?,
                    });
                }
            }
            "synapse" => {
                let pre: usize = field(toks.next(), lineno, "pre")?;
                let post: u32 = field(toks.next(), lineno, "post")?;
                let w: i16 = field(toks.next(), lineno, "weight")?;
                let list = synapses
                    .get_mut(pre)
                    .ok_or_else(|| parse_err(lineno, format!("pre-synaptic id {pre} out of range")))?;
                list.push(Synapse {
                    post: NeuronId(post),
                    weight: Weight(w),
                });
            }
            other => return Err(parse_err(lineno, format!("unknown record '{other}'"))),
        }
        if toks.next().is_some() && key != "model" {
            return Err(parse_err(lineno, "trailing fields"));
        }
    }
    let n = neurons.ok_or_else(|| parse_err(0, "missing neurons record"))?;
    if model_of.len() != n {
        return Err(parse_err(
            0,
            format!("{} neuron records for {n} neurons", model_of.len()),
        ));
    }
    let tags = if tagged.unwrap_or(false) { Some(tags) } else { None };
    SnnGraph::new(
        models,
        model_of,
        synapses,
        tags,
        frac_bits.ok_or_else(|| parse_err(0, "missing frac_bits record"))?,
    )
}

fn write_model<W: Write>(w: &mut W, m: &NeuronModel) -> Result<()> {
    match m {
        NeuronModel::Lif(p) => {
            w.write_u8(0)?;
            for v in [p.tau_m, p.v_rest, p.v_th, p.v_reset] {
                w.write_f64::<LittleEndian>(v)?;
            }
            w.write_u32::<LittleEndian>(p.refractory_steps)?;
        }
        NeuronModel::Izhikevich(p) => {
            w.write_u8(1)?;
            for v in [p.a, p.b, p.c, p.d] {
                w.write_f64::<LittleEndian>(v)?;
            }
        }
        NeuronModel::AdEx(p) => {
            w.write_u8(2)?;
            for v in [
                p.c_m, p.g_l, p.e_l, p.v_t, p.delta_t, p.a, p.b, p.tau_w, p.v_th, p.v_reset,
            ] {
                w.write_f64::<LittleEndian>(v)?;
            }
        }
    }
    Ok(())
}

pub(crate) fn write_model_binary<W: Write>(w: &mut W, m: &NeuronModel) -> Result<()> {
    write_model(w, m)
}

pub(crate) fn read_model_binary<R: Read>(r: &mut R) -> Result<NeuronModel> {
    let f = |r: &mut R| r.read_f64::<LittleEndian>();
    Ok(match r.read_u8()? {
        0 => NeuronModel::Lif(LifParams {
            tau_m: f(r)?,
            v_rest: f(r)?,
            v_th: f(r)?,
            v_reset: f(r)?,
            refractory_steps: r.read_u32::<LittleEndian>()?,
        }),
        1 => NeuronModel::Izhikevich(IzhikevichParams {
            a: f(r)?,
            b: f(r)?,
            c: f(r)?,
            d: f(r)?,
        }),
        2 => NeuronModel::AdEx(AdExParams {
            c_m: f(r)?,
            g_l: f(r)?,
            e_l: f(r)?,
            v_t: f(r)?,
            delta_t: f(r)?,
            a: f(r)?,
            b: f(r)?,
            tau_w: f(r)?,
            v_th: f(r)?,
            v_reset: f(r)?,
        }),
        k => return Err(Error::InvalidGraph(format!("unknown neuron model kind {k}"))),
    })
}

pub fn write_graph_binary<W: Write>(graph: &SnnGraph, mut w: W) -> Result<()> {
    w.write_all(BIN_MAGIC)?;
    w.write_u16::<LittleEndian>(VERSION)?;
    w.write_u8(graph.frac_bits())?;
    w.write_u8(graph.tags().is_some() as u8)?;
    w.write_u32::<LittleEndian>(graph.neuron_count() as u32)?;
    w.write_u16::<LittleEndian>(graph.models().len() as u16)?;
    for m in graph.models() {
        write_model(&mut w, m)?;
    }
    for n in graph.neurons() {
        w.write_u16::<LittleEndian>(graph.model_index(n))?;
        if let Some(t) = graph.tag(n) {
            for v in [t.layer, t.channel, t.x, t.y] {
                w.write_u16::<LittleEndian>(v)?;
            }
        }
    }
    for n in graph.neurons() {
        let out = graph.outgoing(n);
        w.write_u32::<LittleEndian>(out.len() as u32)?;
        for s in out {
            w.write_u32::<LittleEndian>(s.post.0)?;
            w.write_i16::<LittleEndian>(s.weight.0)?;
        }
    }
    Ok(())
}

pub fn read_graph_binary<R: Read>(mut r: R) -> Result<SnnGraph> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != BIN_MAGIC {
        return Err(Error::InvalidGraph("bad binary graph magic".into()));
    }
    let version = r.read_u16::<LittleEndian>()?;
    if version != VERSION {
        return Err(Error::InvalidGraph(format!("unsupported graph version {version}")));
    }
    let frac_bits = r.read_u8()?;
    let tagged = r.read_u8()? != 0;
    let n = r.read_u32::<LittleEndian>()? as usize;
    let model_count = r.read_u16::<LittleEndian>()?;
    let models = (0..model_count)
        .map(|_| read_model_binary(&mut r))
        .collect::<Result<Vec<_>>>()?;
    let mut model_of = Vec::with_capacity(n);
    let mut tags = Vec::new();
    for _ in 0..n {
        model_of.push(r.read_u16::<LittleEndian>()?);
        if tagged {
            tags.push(LayerTag {
                layer: r.read_u16::<LittleEndian>()?,
                channel: r.read_u16::<LittleEndian>()?,
                x: r.read_u16::<LittleEndian>()?,
                y: r.read_u16::<LittleEndian>()?,
            });
        }
    }
    let mut synapses = Vec::with_capacity(n);
    for _ in 0..n {
        let count = r.read_u32::<LittleEndian>()?;
        let list = (0..count)
            .map(|_| {
                Ok(Synapse {
                    post: NeuronId(r.read_u32::<LittleEndian>()?),
                    weight: Weight(r.read_i16::<LittleEndian>()?),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        synapses.push(list);
    }
    SnnGraph::new(models, model_of, synapses, tagged.then_some(tags), frac_bits)
}
