use std::io::Write;
use std::net::{TcpListener, TcpStream};
use std::thread;
use std::time::Duration;

use fmlfs::client::{compute_local_report, ClientReport};
use fmlfs::dataset::{discretize, partition_noniid, MultiLabelDataset};
use fmlfs::federation::{
    read_frame, run_in_process, run_round, serve_tcp, submit_tcp, write_frame, ClientTask, Message,
    Party, ProtocolMessage, RoundSettings, RunConfig, RunLog, Transport,
};
use fmlfs::server::{global_ranking, AggregationMode};
use fmlfs::synthetic::{generate, SyntheticSpec};
use fmlfs::Error;

fn shards(m: u32) -> Vec<MultiLabelDataset> {
    let ds = generate(&SyntheticSpec {
        instances: 400,
        features: 12,
        labels: 4,
        informative: 6,
        noise: 1.0,
        density: 0.3,
        seed: 21,
    })
    .unwrap();
    partition_noniid(&ds, m, 0.5, 3).unwrap().shards(&ds).unwrap()
}

fn reports(shards: &[MultiLabelDataset]) -> Vec<ClientReport> {
    shards
        .iter()
        .enumerate()
        .map(|(i, s)| compute_local_report(&discretize(s, 10).unwrap(), i as u32).unwrap())
        .collect()
}

fn settings(m: u32, timeout: Duration) -> RoundSettings {
    RoundSettings {
        num_clients: m,
        timeout,
        aggregation: AggregationMode::Unweighted,
        log: RunLog::disabled(),
    }
}

#[test]
fn transports_and_arrival_orders_agree() {
    let s = shards(4);
    let base = RunConfig { num_clients: 4, top_k: vec![], ..RunConfig::default() };
    let in_proc = run_round(&base, &s).unwrap().ranking;
    let tcp = RunConfig { transport: Transport::Tcp("127.0.0.1:0".into()), ..base.clone() };
    assert_eq!(run_round(&tcp, &s).unwrap().ranking, in_proc);

    let reps = reports(&s);
    for delays in [[0u64, 30, 60, 90], [90, 60, 30, 0], [40, 0, 80, 20]] {
        let tasks = reps
            .iter()
            .cloned()
            .zip(delays)
            .map(|(r, ms)| {
                ClientTask::new(r.client_id, move || {
                    thread::sleep(Duration::from_millis(ms));
                    Ok(r)
                })
            })
            .collect();
        let out = run_in_process(&settings(4, Duration::from_secs(10)), tasks);
        assert_eq!(out.into_result().unwrap().ranking, in_proc);
    }
    assert_eq!(global_ranking(&reps, AggregationMode::Unweighted).unwrap(), in_proc);
}

fn spawn_server(m: u32, timeout: Duration) -> (std::net::SocketAddr, thread::JoinHandle<fmlfs::Result<fmlfs::federation::ServerOutcome>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handle = thread::spawn(move || serve_tcp(listener, &settings(m, timeout)));
    (addr, handle)
}

#[test]
fn tcp_clients_in_reverse_order_get_the_same_ranking() {
    let reps = reports(&shards(3));
    let expected = global_ranking(&reps, AggregationMode::Unweighted).unwrap();
    let (addr, server) = spawn_server(3, Duration::from_secs(10));
    let clients: Vec<_> = reps
        .into_iter()
        .rev()
        .enumerate()
        .map(|(i, r)| {
            thread::spawn(move || {
                thread::sleep(Duration::from_millis(25 * i as u64));
                submit_tcp(addr, &ProtocolMessage::report(r), Duration::from_secs(15))
            })
        })
        .collect();
    for c in clients {
        assert_eq!(c.join().unwrap().unwrap(), expected);
    }
    assert_eq!(server.join().unwrap().unwrap().ranking, expected);
}

#[test]
fn duplicate_tcp_report_aborts_everyone() {
    let reps = reports(&shards(2));
    let (addr, server) = spawn_server(2, Duration::from_secs(10));
    let first = {
        let r = reps[0].clone();
        thread::spawn(move || submit_tcp(addr, &ProtocolMessage::report(r), Duration::from_secs(15)))
    };
    thread::sleep(Duration::from_millis(100));
    let second = submit_tcp(addr, &ProtocolMessage::report(reps[0].clone()), Duration::from_secs(15));
    assert!(matches!(server.join().unwrap(), Err(Error::DuplicateClient(0))));
    assert!(matches!(first.join().unwrap(), Err(Error::Aborted(_))));
    assert!(matches!(second, Err(Error::Aborted(_))));
}

#[test]
fn tcp_timeout_names_missing_clients() {
    let reps = reports(&shards(3));
    let (addr, server) = spawn_server(3, Duration::from_millis(400));
    let r = reps[1].clone();
    let waiting = thread::spawn(move || submit_tcp(addr, &ProtocolMessage::report(r), Duration::from_secs(10)));
    match server.join().unwrap() {
        Err(Error::Timeout { missing }) => assert_eq!(missing, vec![0, 2]),
        other => panic!("{other:?}"),
    }
    match waiting.join().unwrap() {
        Err(Error::Aborted(reason)) => assert!(reason.contains("[0, 2]"), "{reason}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn malformed_frame_aborts_round() {
    let reps = reports(&shards(2));
    let (addr, server) = spawn_server(2, Duration::from_secs(10));
    let r = reps[0].clone();
    let good = thread::spawn(move || submit_tcp(addr, &ProtocolMessage::report(r), Duration::from_secs(15)));
    thread::sleep(Duration::from_millis(100));
    let mut raw = TcpStream::connect(addr).unwrap();
    raw.write_all(&5u32.to_be_bytes()).unwrap();
    raw.write_all(b"nope!").unwrap();
    assert!(matches!(server.join().unwrap(), Err(Error::Protocol(_))));
    assert!(good.join().unwrap().is_err());
}

#[test]
fn raw_wire_format() {
    let reps = reports(&shards(2));
    let (addr, server) = spawn_server(2, Duration::from_secs(10));
    let mut streams = Vec::new();
    for r in reps {
        let mut s = TcpStream::connect(addr).unwrap();
        let body = serde_json::to_vec(&ProtocolMessage::report(r)).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&body).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["message"]["kind"], "report");
        assert!(v["message"]["payload"]["mi"].is_array());
        s.write_all(&(body.len() as u32).to_be_bytes()).unwrap();
        s.write_all(&body).unwrap();
        streams.push(s);
    }
    let outcome = server.join().unwrap().unwrap();
    for mut s in streams {
        let msg = read_frame(&mut s).unwrap();
        assert_eq!(msg.sender, Party::Server);
        match msg.message {
            Message::Ranking(r) => assert_eq!(r, outcome.ranking),
            other => panic!("{other:?}"),
        }
    }
}

#[test]
fn wrong_schema_version_is_rejected() {
    let reps = reports(&shards(2));
    let (addr, server) = spawn_server(2, Duration::from_secs(10));
    let mut msg = ProtocolMessage::report(reps[0].clone());
    msg.schema_version = 2;
    let mut s = TcpStream::connect(addr).unwrap();
    write_frame(&mut s, &msg).unwrap();
    assert!(matches!(server.join().unwrap(), Err(Error::Protocol(_))));
}
