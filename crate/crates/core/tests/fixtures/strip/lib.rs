fn f<'a>(x: &'a str) -> char { // lifetime
    let c = '"'; let q = '\''; /* block */
    'x'
}
