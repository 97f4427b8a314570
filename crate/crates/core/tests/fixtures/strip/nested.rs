/* outer /* inner */ still code? */
let s = "a\\"; // after escaped backslash
'outer: loop { break 'outer; } // label
