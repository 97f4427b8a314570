package main // pkg

var raw = `raw \ // string`
/* block */ var r = '"'
