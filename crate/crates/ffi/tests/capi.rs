use std::ffi::{CStr, CString};
use std::ptr;

use wcfg_ffi::*;

const G0: &str = "terminals: a b\nnonterminals: S A B\nstart: S\nS -> A B\nA -> 'a' @ 1\nB -> 'b' @ 2\n";

fn grammar(src: &str) -> *mut WcfgGrammar {
    let src = CString::new(src).unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { wcfg_grammar_parse(src.as_ptr(), &mut g) }, WcfgStatus::Ok);
    g
}

fn take_string(s: *mut std::ffi::c_char) -> String {
    assert!(!s.is_null());
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_owned();
    unsafe { wcfg_string_free(s) };
    out
}

fn last_error() -> String {
    let p = wcfg_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn propagate_g0_every_backend() {
    let g = grammar(G0);
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { wcfg_domains_full(g, 2, &mut d) }, WcfgStatus::Ok);
    for backend in [WcfgBackend::Monolithic, WcfgBackend::Decomposition, WcfgBackend::DecompositionWithEntailment] {
        let mut out = ptr::null_mut();
        let mut root_min = -1;
        assert_eq!(unsafe { wcfg_propagate(g, d, 3, backend, &mut out, &mut root_min) }, WcfgStatus::Ok);
        assert_eq!(root_min, 3);
        assert_eq!(take_string(unsafe { wcfg_domains_to_string(out, g) }), "X1={a} X2={b}");
        unsafe {
            assert_eq!(wcfg_domains_len(out), 2);
            assert_eq!(wcfg_domains_contains(out, 1, 0), 1);
            assert_eq!(wcfg_domains_contains(out, 0, 0), 0);
            assert_eq!(wcfg_domains_contains(out, 1, 1), 0);
            wcfg_domains_free(out);
        }

        let mut out = ptr::null_mut();
        assert_eq!(unsafe { wcfg_propagate(g, d, 2, backend, &mut out, ptr::null_mut()) }, WcfgStatus::Infeasible);
        assert!(out.is_null());
    }
    unsafe {
        wcfg_domains_free(d);
        wcfg_grammar_free(g);
    }
}

#[test]
fn domains_file_and_round_trip() {
    let g = grammar(G0);
    assert_eq!(unsafe { wcfg_grammar_num_terminals(g) }, 2);
    let text = take_string(unsafe { wcfg_grammar_to_string(g) });
    let again = grammar(&text);
    assert_eq!(take_string(unsafe { wcfg_grammar_to_string(again) }), text);

    let src = CString::new("X1: a b\nX2: b\n").unwrap();
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { wcfg_domains_parse(g, src.as_ptr(), &mut d) }, WcfgStatus::Ok);
    assert_eq!(take_string(unsafe { wcfg_domains_to_string(d, g) }), "X1={a b} X2={b}");
    unsafe {
        wcfg_domains_free(d);
        wcfg_grammar_free(again);
        wcfg_grammar_free(g);
    }
}

#[test]
fn errors_are_reported() {
    let bad = CString::new("terminals: a\nnonterminals: S\nstart: S\nS -> 'q'\n").unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { wcfg_grammar_parse(bad.as_ptr(), &mut g) }, WcfgStatus::Parse);
    assert!(g.is_null());
    assert!(!last_error().is_empty());

    assert_eq!(unsafe { wcfg_grammar_parse(ptr::null(), &mut g) }, WcfgStatus::NullPointer);
    let src = CString::new(G0).unwrap();
    assert_eq!(unsafe { wcfg_grammar_parse(src.as_ptr(), ptr::null_mut()) }, WcfgStatus::NullPointer);

    let g = grammar(G0);
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { wcfg_domains_full(g, 2, &mut d) }, WcfgStatus::Ok);
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { wcfg_propagate(g, d, -1, WcfgBackend::Monolithic, &mut out, ptr::null_mut()) }, WcfgStatus::InvalidArgument);
    assert!(last_error().contains("non-negative"));
    unsafe {
        wcfg_domains_free(d);
        wcfg_grammar_free(g);
        wcfg_grammar_free(ptr::null_mut());
        wcfg_string_free(ptr::null_mut());
    }
}

#[test]
fn solve_desk_instance() {
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/data/desk/d02_two_employees.inst")).unwrap();
    let src = CString::new(src).unwrap();
    let mut cost = -1;
    let mut log = ptr::null_mut();
    assert_eq!(unsafe { wcfg_solve_instance(src.as_ptr(), WcfgBackend::Monolithic, 0.0, &mut cost, &mut log) }, WcfgStatus::Ok);
    assert_eq!(cost, 12);
    assert!(take_string(log).contains("status=Optimal"));
}

#[test]
fn header_is_current() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/wcfg.h")).unwrap();
    for name in ["wcfg_grammar_parse", "wcfg_propagate", "wcfg_solve_instance", "wcfg_last_error", "WCFG_STATUS_INFEASIBLE"] {
        assert!(header.contains(name), "{name} missing from header");
    }
    assert!(!wcfg_version().is_null());
}
