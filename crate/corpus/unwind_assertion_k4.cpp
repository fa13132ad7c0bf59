// FLAGS: --unwind 4 --unwinding-assertions
int main() {
  int sum = 0;
  for (int i = 1; i <= 8; i++) {
    sum += i;
    assert(sum != 15);
  }
  return 0;
}
// VERDICT: FAILED
// PROPERTY: unwinding assertion
