int main() {
  int arr[3] = {1, 2, 3};
  try {
    throw arr;
  } catch (char *) {
    assert(0);
  } catch (int *p) {
    assert(p[1] == 2);
  }
  return 0;
}
// VERDICT: SUCCESSFUL
