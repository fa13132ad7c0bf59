int main() {
  int x = ;
  return 0;
}
// VERDICT: ERROR
