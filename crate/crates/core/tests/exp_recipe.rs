use errdet_core::graph::{Edge, EdgeType, Graph, Node, NodeKind, TokenizedGraph};
use errdet_core::model::*;
use errdet_core::metrics::{roc_auc, ScoredExample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn chain_graph(tokens: &[String]) -> TokenizedGraph {
    let mut nodes = vec![Node { id: 0, kind: NodeKind::Internal { label: "root".into() } }];
    let mut edges = Vec::new();
    for (i, _) in tokens.iter().enumerate() {
        nodes.push(Node { id: i + 1, kind: NodeKind::Leaf { token_position: i } });
        edges.push(Edge { src: 0, dst: i + 1, etype: EdgeType::Child });
        if i > 0 { edges.push(Edge { src: i, dst: i + 1, etype: EdgeType::Sequential }); }
    }
    TokenizedGraph { graph: Graph::new(nodes, edges).unwrap(), tokens: tokens.to_vec() }
}

const AGGS: [&str; 5] = ["count","max","min","sum","avg"];
const OPS: [(&str, &str); 4] = [("more",">"),("less","<"),("least",">="),("most","<=")];
const COLS: [&str; 10] = ["age","year","price","salary","rating","population","length","weight","height","budget"];
const TABLES: [&str; 10] = ["head","car","festival","student","employee","city","product","team","song","store"];

struct Q { qtoks: Vec<String>, gold: Vec<String>, db: String }

fn gen_question(rng: &mut ChaCha8Rng, db_i: usize) -> Q {
    let table = TABLES[db_i % 10];
    let cols: Vec<&str> = (0..3).map(|k| COLS[(db_i * 3 + k) % 10]).collect();
    let db = format!("db{db_i:02}");
    let vals = ["5","10","20","30","50"];
    match rng.gen_range(0..3) {
        0 => {
            // aggregate question, question mentions the aggregate word itself
            let agg = AGGS[rng.gen_range(0..5)];
            let col = cols[rng.gen_range(0..3)];
            Q { qtoks: [agg, col, table].iter().map(|s|s.to_string()).collect(),
                gold: ["select",agg,"(",col,")","from",table].iter().map(|s|s.to_string()).collect(), db }
        }
        1 => {
            // filter question with comparison word pair
            let (cw, op) = OPS[rng.gen_range(0..4)];
            let col1 = cols[rng.gen_range(0..3)];
            let col2 = cols[rng.gen_range(0..3)];
            let val = vals[rng.gen_range(0..5)];
            Q { qtoks: [col1, table, col2, cw, val].iter().map(|s|s.to_string()).collect(),
                gold: ["select",col1,"from",table,"where",col2,op,val].iter().map(|s|s.to_string()).collect(), db }
        }
        _ => {
            // plain projection question
            let col1 = cols[rng.gen_range(0..3)];
            let col2 = cols[rng.gen_range(0..3)];
            Q { qtoks: [col1, col2, table].iter().map(|s|s.to_string()).collect(),
                gold: ["select",col1,",",col2,"from",table].iter().map(|s|s.to_string()).collect(), db }
        }
    }
}

fn corrupt(rng: &mut ChaCha8Rng, gold: &[String], db_i: usize) -> Vec<String> {
    let mut sql = gold.to_vec();
    let cols: Vec<&str> = (0..3).map(|k| COLS[(db_i * 3 + k) % 10]).collect();
    for _ in 0..20 {
        // column/aggregate swaps dominate, matching real beam error skew
        let mode = [0, 0, 1, 2, 2, 2][rng.gen_range(0..6)];
        match mode {
            0 => { // agg swap
                if let Some(pos) = sql.iter().position(|t| AGGS.iter().any(|a| a==t)) {
                    let cur = sql[pos].clone();
                    let other = AGGS[rng.gen_range(0..5)];
                    if other != cur { sql[pos] = other.into(); return sql; }
                }
            }
            1 => { // op swap
                if let Some(pos) = sql.iter().position(|t| OPS.iter().any(|(_,o)| o==t)) {
                    let cur = sql[pos].clone();
                    let other = OPS[rng.gen_range(0..4)].1;
                    if other != cur { sql[pos] = other.into(); return sql; }
                }
            }
            _ => { // column swap
                let positions: Vec<usize> = sql.iter().enumerate().filter(|(_,t)| cols.contains(&t.as_str())).map(|(i,_)| i).collect();
                if !positions.is_empty() {
                    let pos = positions[rng.gen_range(0..positions.len())];
                    let cur = sql[pos].clone();
                    let other = cols[rng.gen_range(0..3)];
                    if other != cur { sql[pos] = other.into(); return sql; }
                }
            }
        }
    }
    sql.push("1".into()); sql
}

#[test]
fn exp_recipe() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let n_dbs = 20; let n_beams = 1000;
    let mut raw: Vec<(Q, Vec<(Vec<String>, bool)>)> = Vec::new();
    for b in 0..n_beams {
        let db_i = b % n_dbs;
        let q = gen_question(&mut rng, db_i);
        let mut preds = vec![(q.gold.clone(), true)];
        preds.push((corrupt(&mut rng, &q.gold, db_i), false));
        raw.push((q, preds));
    }
    let all_tokens: Vec<String> = raw.iter().flat_map(|(q, preds)| {
        q.qtoks.iter().cloned().chain(preds.iter().flat_map(|(s,_)| s.iter().cloned()))
    }).collect();
    let vocab = TokenVocab::build(all_tokens.iter().map(String::as_str), 1);
    let labels = LabelVocab::build(["root"].iter().copied(), 1);
    eprintln!("vocab {} tokens", vocab.len());

    // Held-out dbs: 16 train / 4 dev by db index.
    let mut train_beams = Vec::new(); let mut dev = Vec::new();
    for (q, preds) in &raw {
        let qg = chain_graph(&q.qtoks);
        let examples: Vec<PairExample> = preds.iter().map(|(sql, lab)| {
            let sg = chain_graph(sql);
            let mut pe = build_pair(&qg, &sg, &vocab, &labels, *lab).unwrap();
            pe.db_id = q.db.clone(); pe
        }).collect();
        let db_i: usize = q.db[2..].parse().unwrap();
        if db_i < 16 { train_beams.push(TrainBeam { examples }); } else { dev.extend(examples); }
    }
    eprintln!("train beams {}, dev examples {}", train_beams.len(), dev.len());

    // Probe pooled representation magnitude at init.
    {
        let mut cfg = ModelConfig::new(vocab.len(), labels.len());
        cfg.hidden_dim = 64; cfg.attention_heads = 4; cfg.dropout_rate = 0.0; cfg.seed = 3;
        cfg.embed_init_std = 0.3; cfg.weight_init_std = 0.3;
        let params = Parameters::init(&cfg).unwrap();
        let ex0 = &dev[0];
        let hg = encode_pair(&ex0.question, &ex0.sql, &params).unwrap();
        let rms = (hg.iter().map(|x| x * x).sum::<f64>() / hg.len() as f64).sqrt();
        eprintln!("h_global per-dim rms at embed=0.3,w=0.3: {rms:.4}");
    }
    for (n_units, out_std) in [(1024usize, 0.0), (1024, 0.003), (2048, 0.0)] {
        let mut cfg = ModelConfig::new(vocab.len(), labels.len());
        cfg.hidden_dim = 64; cfg.attention_heads = 4; cfg.dropout_rate = 0.1; cfg.seed = 3;
        cfg.embed_init_std = 0.3; cfg.weight_init_std = 0.3;
        cfg.ffn_hidden_dim = Some(n_units); cfg.ffn_w1_init_std = 1.0; cfg.output_init_std = out_std;
        let tcfg = TrainConfig { seed: 5, ..TrainConfig::default() };
        let t0 = std::time::Instant::now();
        let out = train(&train_beams, &dev, &cfg, &tcfg).unwrap();
        let scores = predict(&out.params, &dev).unwrap();
        let ex: Vec<ScoredExample> = scores.iter().zip(&dev).map(|(s,e)| ScoredExample{question_id:String::new(),db_id:e.db_id.clone(),score:*s,label:e.label,beam_rank:0}).collect();
        let first = out.log.first().unwrap().loss; let last = out.log.last().unwrap().loss;
        eprintln!("units={n_units} out={out_std}: recipe loss {first:.4}->{last:.4} dev AUC {:.4} best_acc {:.3} ({:.0}s)", roc_auc(&ex).unwrap(), out.best_dev_acc, t0.elapsed().as_secs_f32());
    }
}
