let s = "héllo // ☃"; // ünï
let c = '☃'; // snowman
let d = 'é'; /* ç */
