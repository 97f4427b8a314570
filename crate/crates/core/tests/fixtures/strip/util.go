func f() {
	s := "tab\t// str" // comment
}
/* unterminated at end