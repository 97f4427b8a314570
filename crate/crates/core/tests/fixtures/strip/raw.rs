let r = r#"raw "quoted" // kept"#; // gone
let r2 = r"c:\path // kept"; /* x */
