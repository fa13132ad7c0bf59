int main() {
  int *p = new int(3);
  delete p;
  delete p;
  return 0;
}
// VERDICT: FAILED
// PROPERTY: invalid object in delete
