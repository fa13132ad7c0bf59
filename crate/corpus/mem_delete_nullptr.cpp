int main() {
  int *p = nullptr;
  delete p;
  delete[] p;
  return 0;
}
// VERDICT: SUCCESSFUL
