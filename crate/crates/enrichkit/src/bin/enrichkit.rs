fn main() {
    println!("enrichkit CLI placeholder");
}
